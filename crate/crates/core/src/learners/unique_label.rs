use rand::Rng as _;

use crate::model::Label;
use crate::rng::{self, Rng};
use crate::world::{Feedback, Instance};

use super::{Learner, LearnerError, Move, Prediction, RefineOutcome, Rule, Update};

/// Randomized learner for worlds where every component has its own label.
/// Keeps at most one rule per label, repairs rules by dropping literals,
/// and deletes a rule after `m + l - 1` updates.
#[derive(Clone, Debug)]
pub struct UniqueLabel {
    p: f64,
    threshold: u32,
    rng: Rng,
    anchor: Option<(usize, Label)>,
    rules: Vec<Rule>,
    next_id: u64,
    matched: Option<u64>,
}

impl UniqueLabel {
    pub fn new(p: f64, l: u32, m: usize, seed: u64) -> Result<Self, LearnerError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(LearnerError::Params(format!("p = {p} is not a probability")));
        }
        if l < 1 {
            return Err(LearnerError::Params("l must be at least 1".into()));
        }
        if m < 1 {
            return Err(LearnerError::Params("m must be at least 1".into()));
        }
        Ok(UniqueLabel {
            p,
            threshold: m as u32 + l - 1,
            rng: rng::seeded(seed),
            anchor: None,
            rules: Vec::new(),
            next_id: 0,
            matched: None,
        })
    }

    /// The setting `l = m - 1`, `p = 1/(m - 1)`; needs `m >= 2`.
    pub fn for_components(m: usize, seed: u64) -> Result<Self, LearnerError> {
        if m < 2 {
            return Err(LearnerError::Params("needs at least two components".into()));
        }
        Self::new(1.0 / (m - 1) as f64, m as u32 - 1, m, seed)
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    fn bump(&mut self, pos: usize) -> bool {
        self.rules[pos].update_count += 1;
        let deleted = self.rules[pos].update_count >= self.threshold;
        if deleted {
            self.rules.remove(pos);
        }
        deleted
    }
}

impl Learner for UniqueLabel {
    fn name(&self) -> &'static str {
        "unique_label"
    }

    fn predict(&mut self, x: &Instance) -> Result<Move, LearnerError> {
        let Some((t0, y0)) = &self.anchor else {
            return Ok(Move::Query);
        };
        for rule in &self.rules {
            if rule.matches(&x.example)? {
                self.matched = Some(rule.id);
                return Ok(Move::Predict(Prediction {
                    label: rule.label.clone(),
                    explanation: rule.rep_t,
                }));
            }
        }
        self.matched = None;
        Ok(Move::Predict(Prediction {
            label: y0.clone(),
            explanation: *t0,
        }))
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
                self.anchor = Some((x.t, fb.label.clone()));
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

        if let Some(id) = self.matched.take() {
            let pos = self
                .rules
                .iter()
                .position(|r| r.id == id)
                .ok_or_else(|| LearnerError::Other(format!("matched rule {id} vanished")))?;
            let literal = phi.negate();
            let rule = &mut self.rules[pos];
            let consistent =
                rule.representative.satisfies(literal)? && x.example.satisfies(phi)?;
            let outcome = if consistent {
                rule.conjunction.insert(literal);
                RefineOutcome::Added
            } else {
                RefineOutcome::Ignored
            };
            let deleted = self.bump(pos);
            return Ok(Update::Refined {
                rule: id,
                literal,
                outcome,
                deleted,
            });
        }

        match self.rules.iter().position(|r| r.label == fb.label) {
            Some(pos) => {
                let rule = &mut self.rules[pos];
                let mut unsatisfied = None;
                for &lit in rule.conjunction.iter() {
                    if !x.example.satisfies(lit)? {
                        unsatisfied = Some(lit);
                        break;
                    }
                }
                let literal = unsatisfied.ok_or(LearnerError::NothingToRemove {
                    t: x.t,
                    rule: rule.id,
                })?;
                rule.conjunction.remove(&literal);
                let id = rule.id;
                let deleted = self.bump(pos);
                Ok(Update::Pruned {
                    rule: id,
                    literal,
                    deleted,
                })
            }
            None => {
                if self.rng.gen_bool(self.p) {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.rules.push(Rule::new(id, x, fb.label.clone()));
                    Ok(Update::Created { rule: id })
                } else {
                    Ok(Update::Declined)
                }
            }
        }
    }

    fn rules(&self) -> &[Rule] {
        &self.rules
    }
}
