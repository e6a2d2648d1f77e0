use std::io::{BufRead, BufReader, Write};
use std::thread;

use crate::learners::{run_session, Learner, LearnerError, LearnerSpec, Move, Prediction, Update};
use crate::model::Representation;
use crate::world::{Feedback, Instance, StreamEvent, Transcript};

use super::{duplex, serve_session, FrameReader, FrameWriter, ProtocolError, SessionSummary, WireMessage};

/// Teacher-side stand-in for a learner served elsewhere. Each call is one
/// request/response exchange over the wire.
pub struct RemoteLearner<R, W> {
    reader: FrameReader<R>,
    writer: FrameWriter<W>,
    name: &'static str,
    mistakes: u64,
}

fn wire(e: ProtocolError) -> LearnerError {
    LearnerError::Other(e.to_string())
}

impl<R: BufRead, W: Write> RemoteLearner<R, W> {
    pub fn connect(reader: R, writer: W, spec: &LearnerSpec) -> Result<Self, ProtocolError> {
        let mut writer = FrameWriter::new(writer);
        writer.send(&WireMessage::init(spec))?;
        Ok(RemoteLearner {
            reader: FrameReader::new(reader),
            writer,
            name: spec.label(),
            mistakes: 0,
        })
    }

    fn receive(&mut self) -> Result<WireMessage, ProtocolError> {
        match self.reader.read()? {
            Some(WireMessage::SessionEnd {
                error: Some(e), ..
            }) => Err(ProtocolError::Remote(e)),
            Some(m) => Ok(m),
            None => Err(ProtocolError::Closed),
        }
    }

    /// Ends the session and returns the server's mistake count.
    pub fn finish(mut self) -> Result<u64, ProtocolError> {
        self.writer.send(&WireMessage::SessionEnd {
            mistakes: self.mistakes,
            error: None,
        })?;
        match self.receive()? {
            WireMessage::SessionEnd { mistakes, .. } => Ok(mistakes),
            other => Err(ProtocolError::Violation(format!(
                "expected SessionEnd, got {}",
                other.kind()
            ))),
        }
    }
}

impl<R: BufRead + Send, W: Write + Send> Learner for RemoteLearner<R, W> {
    fn name(&self) -> &'static str {
        self.name
    }

    fn predict(&mut self, x: &Instance) -> Result<Move, LearnerError> {
        self.writer
            .send(&WireMessage::Example {
                t: x.t,
                assignment: (*x.example).clone(),
            })
            .map_err(wire)?;
        match self.receive().map_err(wire)? {
            WireMessage::Prediction {
                t,
                label,
                explanation_id,
            } if t == x.t => match (label, explanation_id) {
                (None, None) => Ok(Move::Query),
                (Some(label), Some(explanation)) => Ok(Move::Predict(Prediction { label, explanation })),
                _ => Err(LearnerError::Other(format!(
                    "prediction for t={t} needs both a label and an explanation"
                ))),
            },
            other => Err(LearnerError::Other(format!(
                "expected a prediction for t={}, got {other:?}",
                x.t
            ))),
        }
    }

    fn absorb(
        &mut self,
        x: &Instance,
        mv: &Move,
        feedback: Option<&Feedback>,
    ) -> Result<Update, LearnerError> {
        let msg = match feedback {
            Some(fb) => {
                if matches!(mv, Move::Predict(_)) {
                    self.mistakes += 1;
                }
                WireMessage::Feedback {
                    t: x.t,
                    label: fb.label.clone(),
                    feature: fb.literal.map(|l| l.feature.0),
                    polarity: fb.literal.map(|l| l.polarity),
                }
            }
            None => WireMessage::Ack { t: x.t },
        };
        self.writer.send(&msg).map_err(wire)?;
        Ok(Update::Opaque)
    }
}

/// Plays `stream` against a learner served on another thread through an
/// in-memory connection. Returns the teacher-side transcript and the
/// server's summary.
pub fn loopback(
    spec: &LearnerSpec,
    stream: &[StreamEvent],
    world: &Representation,
) -> Result<(Transcript, SessionSummary), ProtocolError> {
    let ((client_r, client_w), (server_r, server_w)) = duplex();
    let server = thread::spawn(move || serve_session(BufReader::new(server_r), server_w, |s| s.build()));
    let mut remote = RemoteLearner::connect(BufReader::new(client_r), client_w, spec)?;
    let played = run_session(&mut remote, stream, world);
    let finished = match &played {
        Ok(_) => remote.finish().map(Some),
        Err(_) => {
            drop(remote);
            Ok(None)
        }
    };
    let summary = server
        .join()
        .map_err(|_| ProtocolError::Violation("server thread panicked".into()))??;
    let transcript = played.map_err(|e| ProtocolError::Violation(e.to_string()))?;
    if let Some(mistakes) = finished? {
        if mistakes != transcript.mistakes() as u64 {
            return Err(ProtocolError::Violation(format!(
                "server counted {mistakes} mistakes, transcript has {}",
                transcript.mistakes()
            )));
        }
    }
    Ok((transcript, summary))
}
