use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Feedback;
use crate::model::{Example, Label};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundHidden {
    /// Injected, or inconsistent with the world for any other reason.
    pub exception: bool,
    pub component: usize,
}

/// One protocol round as logged by a session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub t: usize,
    pub example: Arc<Example>,
    /// `None` on the anchor round, where the learner asks for the label.
    pub predicted: Option<Label>,
    pub explanation_id: Option<usize>,
    pub feedback: Option<Feedback>,
    pub mistake: bool,
    pub hidden: RoundHidden,
    #[serde(skip)]
    pub injected: bool,
}

impl Round {
    /// The label the learner ends the round knowing for this example.
    pub fn observed_label(&self) -> Option<&Label> {
        match &self.feedback {
            Some(fb) => Some(&fb.label),
            None => self.predicted.as_ref(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub rounds: Vec<Round>,
}

impl Transcript {
    pub fn mistakes(&self) -> usize {
        self.rounds.iter().filter(|r| r.mistake).count()
    }

    pub fn injected(&self) -> usize {
        self.rounds.iter().filter(|r| r.injected).count()
    }

    pub fn flagged(&self) -> usize {
        self.rounds.iter().filter(|r| r.hidden.exception).count()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, serde_json::Error> {
        let mut rounds = Vec::new();
        for line in input.lines() {
            let line = line.map_err(serde_json::Error::io)?;
            if line.trim().is_empty() {
                continue;
            }
            rounds.push(serde_json::from_str(&line)?);
        }
        Ok(Transcript { rounds })
    }
}
