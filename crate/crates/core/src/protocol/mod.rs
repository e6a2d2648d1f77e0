//! Newline-delimited JSON wire format for the learner side of the round
//! loop, a session server and a teacher-side proxy learner.

mod codec;
mod pipe;
mod remote;
mod serve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{LearnerError, LearnerSpec};
use crate::model::{Example, Label};

pub use codec::{decode, encode, DecodeError, DecodeErrorKind, FrameReader, FrameWriter, MAX_FRAME};
pub use pipe::{duplex, pipe, PipeReader, PipeWriter};
pub use remote::{loopback, RemoteLearner};
pub use serve::{serve_connection, serve_session, serve_stdio, serve_tcp, SessionSummary};

/// One frame. The `type` field carries the variant name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum WireMessage {
    Example {
        t: usize,
        assignment: Example,
    },
    /// Without a label this is a label query.
    Prediction {
        t: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<Label>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        explanation_id: Option<usize>,
    },
    Feedback {
        t: usize,
        label: Label,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feature: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        polarity: Option<bool>,
    },
    Ack {
        t: usize,
    },
    SessionInit {
        learner: String,
        #[serde(default)]
        params: serde_json::Map<String, serde_json::Value>,
    },
    SessionEnd {
        mistakes: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
}

impl WireMessage {
    pub fn init(spec: &LearnerSpec) -> Self {
        let mut params = match serde_json::to_value(spec) {
            Ok(serde_json::Value::Object(map)) => map,
            _ => serde_json::Map::new(),
        };
        params.remove("name");
        WireMessage::SessionInit {
            learner: spec.label().to_string(),
            params,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Example { .. } => "Example",
            WireMessage::Prediction { .. } => "Prediction",
            WireMessage::Feedback { .. } => "Feedback",
            WireMessage::Ack { .. } => "Ack",
            WireMessage::SessionInit { .. } => "SessionInit",
            WireMessage::SessionEnd { .. } => "SessionEnd",
        }
    }
}

/// The learner named by a `SessionInit`.
pub fn spec_from_init(
    learner: &str,
    params: &serde_json::Map<String, serde_json::Value>,
) -> Result<LearnerSpec, ProtocolError> {
    let mut obj = params.clone();
    obj.insert("name".into(), learner.into());
    serde_json::from_value(serde_json::Value::Object(obj))
        .map_err(|e| ProtocolError::Violation(format!("bad learner spec: {e}")))
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("frame of {len} bytes exceeds the {MAX_FRAME}-byte limit")]
    FrameTooLarge { len: usize },
    #[error("protocol violation: {0}")]
    Violation(String),
    #[error("peer ended the session: {0}")]
    Remote(String),
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
