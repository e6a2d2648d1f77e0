//! Online learners for the adversarial setting and the session loop that
//! connects them to a teacher.

mod pfrdff;
mod session;
mod srdff;
mod unique_label;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Conjunction, Example, Label, Literal, ModelError};
use crate::world::{Feedback, Instance};

pub use pfrdff::{pfrdff_run, PfrDff, PhaseRecord, PhaseSchedule};
pub use session::{run_session, Session, SessionError, Step};
pub use srdff::SrDff;
pub use unique_label::UniqueLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("round {t}: feedback on a correct prediction")]
    FeedbackOnCorrect { t: usize },
    #[error("round {t}: a label query needs a labeled answer")]
    MissingLabel { t: usize },
    #[error("round {t}: feedback on a prediction must name a feature")]
    MissingFeature { t: usize },
    #[error("round {t}: prediction requested before the anchor example")]
    NotAnchored { t: usize },
    #[error("round {t}: rule {rule} has no literal unsatisfied by the example")]
    NothingToRemove { t: usize, rule: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub label: Label,
    /// Round index of the explanation example.
    pub explanation: usize,
}

/// What a learner does with a fresh example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Move {
    /// Ask for the label without predicting. Only allowed on the first round.
    Query,
    Predict(Prediction),
}

impl Move {
    pub fn predicted(&self) -> Option<&Label> {
        match self {
            Move::Query => None,
            Move::Predict(p) => Some(&p.label),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineOutcome {
    Added,
    /// The literal was already in the conjunction.
    Duplicate,
    /// The consistency guard rejected the feedback.
    Ignored,
}

/// How a round changed the learner's rule list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Update {
    Anchored,
    None,
    Created {
        rule: u64,
    },
    Refined {
        rule: u64,
        literal: Literal,
        outcome: RefineOutcome,
        deleted: bool,
    },
    Pruned {
        rule: u64,
        literal: Literal,
        deleted: bool,
    },
    /// A rule creation was considered and skipped by a coin flip.
    Declined,
    /// The learner started over; all rules were discarded.
    Restarted,
    /// The learner runs elsewhere and did not report its change.
    Opaque,
}

impl Update {
    /// Rule touched by this update, if any.
    pub fn rule(&self) -> Option<u64> {
        match self {
            Update::Created { rule } | Update::Refined { rule, .. } | Update::Pruned { rule, .. } => {
                Some(*rule)
            }
            _ => None,
        }
    }

    pub fn deleted(&self) -> bool {
        matches!(
            self,
            Update::Refined { deleted: true, .. } | Update::Pruned { deleted: true, .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: u64,
    pub representative: Arc<Example>,
    pub rep_t: usize,
    pub conjunction: Conjunction,
    pub label: Label,
    pub update_count: u32,
}

impl Rule {
    fn new(id: u64, x: &Instance, label: Label) -> Self {
        Rule {
            id,
            representative: x.example.clone(),
            rep_t: x.t,
            conjunction: Conjunction::new(),
            label,
            update_count: 0,
        }
    }

    pub fn matches(&self, x: &Example) -> Result<bool, ModelError> {
        self.conjunction.satisfied_by(x)
    }
}

/// One side of the round loop. Learners see only the [`Instance`], never
/// the simulator's hidden metadata.
pub trait Learner: Send {
    fn name(&self) -> &'static str;

    fn predict(&mut self, x: &Instance) -> Result<Move, LearnerError>;

    /// `feedback` is `Some` iff the teacher declared a mistake (or answered
    /// a query).
    fn absorb(
        &mut self,
        x: &Instance,
        mv: &Move,
        feedback: Option<&Feedback>,
    ) -> Result<Update, LearnerError>;

    fn rules(&self) -> &[Rule] {
        &[]
    }
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn predict(&mut self, x: &Instance) -> Result<Move, LearnerError> {
        (**self).predict(x)
    }

    fn absorb(
        &mut self,
        x: &Instance,
        mv: &Move,
        feedback: Option<&Feedback>,
    ) -> Result<Update, LearnerError> {
        (**self).absorb(x, mv, feedback)
    }

    fn rules(&self) -> &[Rule] {
        (**self).rules()
    }
}

/// `UB(m, k) = m(m-1) + mk`.
pub fn ub(m: u64, k: u64) -> u64 {
    m * m.saturating_sub(1) + m * k
}

/// Learner selection as written in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum LearnerSpec {
    Srdff {
        m: usize,
    },
    Dff18,
    UniqueLabel {
        p: f64,
        l: u32,
        #[serde(default)]
        seed: u64,
        /// Component bound for the deletion threshold; defaults to `l + 1`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
    },
    Pfrdff,
}

impl LearnerSpec {
    pub fn build(&self) -> Result<Box<dyn Learner>, LearnerError> {
        Ok(match self {
            LearnerSpec::Srdff { m } => Box::new(SrDff::new(*m)?),
            LearnerSpec::Dff18 => Box::new(SrDff::dff18()),
            LearnerSpec::UniqueLabel { p, l, seed, m } => {
                Box::new(UniqueLabel::new(*p, *l, m.unwrap_or(*l as usize + 1), *seed)?)
            }
            LearnerSpec::Pfrdff => Box::new(PfrDff::new()),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            LearnerSpec::Srdff { .. } => "srdff",
            LearnerSpec::Dff18 => "dff18",
            LearnerSpec::UniqueLabel { .. } => "unique_label",
            LearnerSpec::Pfrdff => "pfrdff",
        }
    }

    /// The same learner with a different random seed, where that applies.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            LearnerSpec::UniqueLabel { p, l, m, .. } => LearnerSpec::UniqueLabel {
                p: *p,
                l: *l,
                seed,
                m: *m,
            },
            other => other.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ub_values() {
        assert_eq!(ub(3, 0), 6);
        assert_eq!(ub(1, 5), 5);
        assert_eq!(ub(2, 3), 8);
        assert_eq!(ub(3, 2), 12);
    }

    #[test]
    fn spec_json() {
        let s: LearnerSpec = serde_json::from_str(r#"{"name":"srdff","m":3}"#).unwrap();
        assert_eq!(s, LearnerSpec::Srdff { m: 3 });
        let s: LearnerSpec = serde_json::from_str(r#"{"name":"dff18"}"#).unwrap();
        assert_eq!(s, LearnerSpec::Dff18);
        let s: LearnerSpec =
            serde_json::from_str(r#"{"name":"unique_label","p":0.5,"l":2,"seed":4}"#).unwrap();
        assert_eq!(
            s,
            LearnerSpec::UniqueLabel {
                p: 0.5,
                l: 2,
                seed: 4,
                m: None
            }
        );
        let s: LearnerSpec = serde_json::from_str(r#"{"name":"pfrdff"}"#).unwrap();
        assert_eq!(s.label(), "pfrdff");
        assert!(LearnerSpec::Srdff { m: 0 }.build().is_err());
    }
}
