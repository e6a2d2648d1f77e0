//! World generation, example streams with planted exceptions, and the
//! teacher oracle.

mod files;
mod generate;
mod source;
pub(crate) mod stream;
mod teacher;
mod transcript;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Example, Label, Literal, ModelError};

pub use files::{
    load_world, read_world, save_world, write_world, ErmMode, PhiEntry, Scenario,
    StochasticPipeline, StreamSpec, WorldFile, WorldRef,
};
pub use generate::{generate_world, WorldGenParams};
pub use source::{stochastic_stream, StochasticSource};
pub use stream::{adversarial_stream, ExceptionSpec, ScriptItem, ScriptRound};
pub use teacher::{
    count_min_exceptions, round_consistent, separating_literal, teacher_label, teacher_respond,
    true_feature,
    wrong_feature, Explained,
};
pub use transcript::{Round, RoundHidden, Transcript};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("script round {round} references component {component}, world has {m}")]
    UnknownComponent {
        round: usize,
        component: usize,
        m: usize,
    },
    #[error("exception index {index} is outside a script of length {len}")]
    ExceptionOutOfRange { index: usize, len: usize },
    #[error("script round {0} carries an example that no component contains")]
    UncoveredExample(usize),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

/// What the teacher says after a round. Round 0 answers carry a label only.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Feedback {
    pub label: Label,
    pub literal: Option<Literal>,
}

#[derive(Serialize, Deserialize)]
struct FeedbackWire {
    label: Label,
    feature: Option<u32>,
    polarity: Option<bool>,
}

impl Serialize for Feedback {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FeedbackWire {
            label: self.label.clone(),
            feature: self.literal.map(|l| l.feature.0),
            polarity: self.literal.map(|l| l.polarity),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Feedback {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = FeedbackWire::deserialize(d)?;
        let literal = match (w.feature, w.polarity) {
            (Some(f), Some(p)) => Some(Literal::new(f, p)),
            (None, None) => None,
            _ => {
                return Err(serde::de::Error::custom(
                    "feature and polarity must be given together",
                ))
            }
        };
        Ok(Feedback {
            label: w.label,
            literal,
        })
    }
}

/// How an exception round distorts the teacher's answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    WrongLabel,
    WrongFeature,
    Both,
    /// Each exception picks one of the three kinds above uniformly.
    Mixed,
}

impl CorruptionKind {
    pub fn corrupts_label(self) -> bool {
        matches!(self, CorruptionKind::WrongLabel | CorruptionKind::Both)
    }

    pub fn corrupts_feature(self) -> bool {
        matches!(self, CorruptionKind::WrongFeature | CorruptionKind::Both)
    }
}

/// Randomness for one exception round, drawn when the stream is built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corruption {
    /// Never `Mixed`.
    pub kind: CorruptionKind,
    pub wrong_label: Label,
    pub draw: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExceptionPlan {
    Corrupt(Corruption),
    /// Scripted answer; `None` keeps the teacher silent.
    Override(Option<Feedback>),
}

/// Simulator-side metadata. Never handed to learners.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hidden {
    pub component: usize,
    pub exception: Option<ExceptionPlan>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamEvent {
    pub t: usize,
    pub example: Arc<Example>,
    pub hidden: Hidden,
}

impl StreamEvent {
    pub fn instance(&self) -> Instance {
        Instance {
            t: self.t,
            example: self.example.clone(),
        }
    }

    pub fn injected(&self) -> bool {
        self.hidden.exception.is_some()
    }
}

/// The learner-visible part of a round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub t: usize,
    pub example: Arc<Example>,
}
