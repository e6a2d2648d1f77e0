use crate::model::{Example, Label};
use crate::world::{Feedback, Instance};

use super::{Learner, LearnerError, Move, Prediction, RefineOutcome, Rule, Update};

#[derive(Clone, Debug)]
struct Anchor {
    t: usize,
    label: Label,
}

/// Decision-list learner with rule deletion at conjunction size `m`.
/// Without a bound it is the deletion-free DFF18 baseline.
#[derive(Clone, Debug)]
pub struct SrDff {
    m: Option<usize>,
    anchor: Option<Anchor>,
    rules: Vec<Rule>,
    next_id: u64,
    matched: Option<u64>,
}

impl SrDff {
    pub fn new(m: usize) -> Result<Self, LearnerError> {
        if m < 1 {
            return Err(LearnerError::Params("m must be at least 1".into()));
        }
        Ok(Self::with_bound(Some(m)))
    }

    pub fn dff18() -> Self {
        Self::with_bound(None)
    }

    fn with_bound(m: Option<usize>) -> Self {
        SrDff {
            m,
            anchor: None,
            rules: Vec::new(),
            next_id: 0,
            matched: None,
        }
    }

    pub fn m(&self) -> Option<usize> {
        self.m
    }

    pub fn is_anchored(&self) -> bool {
        self.anchor.is_some()
    }

    /// Sets `(x0, y0)` without a query round.
    pub fn set_anchor(&mut self, t: usize, label: Label) {
        self.anchor = Some(Anchor { t, label });
    }

    pub fn anchor_label(&self) -> Option<&Label> {
        self.anchor.as_ref().map(|a| &a.label)
    }

    /// The move `predict` would make, and the rule behind it.
    pub fn peek(&self, x: &Example) -> Result<(Move, Option<u64>), LearnerError> {
        let Some(anchor) = &self.anchor else {
            return Ok((Move::Query, None));
        };
        for rule in &self.rules {
            if rule.matches(x)? {
                let p = Prediction {
                    label: rule.label.clone(),
                    explanation: rule.rep_t,
                };
                return Ok((Move::Predict(p), Some(rule.id)));
            }
        }
        let p = Prediction {
            label: anchor.label.clone(),
            explanation: anchor.t,
        };
        Ok((Move::Predict(p), None))
    }
}

impl Learner for SrDff {
    fn name(&self) -> &'static str {
        if self.m.is_some() {
            "srdff"
        } else {
            "dff18"
        }
    }

    fn predict(&mut self, x: &Instance) -> Result<Move, LearnerError> {
        let (mv, matched) = self.peek(&x.example)?;
        self.matched = matched;
        Ok(mv)
    }

    fn absorb(
        &mut self,
        x: &Instance,
        mv: &Move,
        feedback: Option<&Feedback>,
    ) -> Result<Update, LearnerError> {
        let p = match mv {
            Move::Query => {
                let fb = feedback.ok_or(LearnerError::MissingLabel { t: x.t })?;
                self.set_anchor(x.t, fb.label.clone());
                return Ok(Update::Anchored);
            }
            Move::Predict(p) => p,
        };
        let Some(fb) = feedback else {
            return Ok(Update::None);
        };
        if fb.label == p.label {
            return Err(LearnerError::FeedbackOnCorrect { t: x.t });
        }
        let phi = fb.literal.ok_or(LearnerError::MissingFeature { t: x.t })?;

        match self.matched.take() {
            Some(id) => {
                let pos = self
                    .rules
                    .iter()
                    .position(|r| r.id == id)
                    .ok_or_else(|| LearnerError::Other(format!("matched rule {id} vanished")))?;
                let literal = phi.negate();
                let rule = &mut self.rules[pos];
                let outcome = if rule.conjunction.insert(literal) {
                    RefineOutcome::Added
                } else {
                    RefineOutcome::Duplicate
                };
                rule.update_count += 1;
                let deleted = matches!(self.m, Some(m) if rule.conjunction.len() >= m);
                if deleted {
                    self.rules.remove(pos);
                }
                Ok(Update::Refined {
                    rule: id,
                    literal,
                    outcome,
                    deleted,
                })
            }
            None => {
                let id = self.next_id;
                self.next_id += 1;
                self.rules.push(Rule::new(id, x, fb.label.clone()));
                Ok(Update::Created { rule: id })
            }
        }
    }

    fn rules(&self) -> &[Rule] {
        &self.rules
    }
}
