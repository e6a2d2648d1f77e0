use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use serde::Serialize;

use crate::learners::{Learner, LearnerError, LearnerSpec, Move};
use crate::model::Literal;
use crate::world::{Feedback, Instance};

use super::{spec_from_init, FrameReader, FrameWriter, ProtocolError, WireMessage};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionSummary {
    pub learner: String,
    pub rounds: usize,
    pub mistakes: u64,
    /// Set when the session was aborted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Pending {
    inst: Instance,
    mv: Move,
}

struct Server<W: Write> {
    writer: FrameWriter<W>,
    learner: Box<dyn Learner>,
    name: String,
    pending: Option<Pending>,
    last_t: Option<usize>,
    seen: HashSet<usize>,
    rounds: usize,
    mistakes: u64,
}

impl<W: Write> Server<W> {
    fn summary(&self, error: Option<String>) -> SessionSummary {
        SessionSummary {
            learner: self.name.clone(),
            rounds: self.rounds,
            mistakes: self.mistakes,
            error,
        }
    }

    fn settle(&mut self, feedback: Option<&Feedback>) -> Result<(), LearnerError> {
        if let Some(p) = self.pending.take() {
            if feedback.is_some() && matches!(p.mv, Move::Predict(_)) {
                self.mistakes += 1;
            }
            self.learner.absorb(&p.inst, &p.mv, feedback)?;
        }
        Ok(())
    }

    /// Handles one message; `Ok(true)` ends the session.
    fn handle(&mut self, msg: WireMessage) -> Result<bool, String> {
        match msg {
            WireMessage::Example { t, assignment } => {
                self.settle(None).map_err(|e| e.to_string())?;
                if let Some(last) = self.last_t {
                    if t <= last {
                        return Err(format!("example t={t} does not follow t={last}"));
                    }
                }
                let inst = Instance {
                    t,
                    example: Arc::new(assignment),
                };
                let mv = self.learner.predict(&inst).map_err(|e| e.to_string())?;
                let reply = match &mv {
                    Move::Query => WireMessage::Prediction {
                        t,
                        label: None,
                        explanation_id: None,
                    },
                    Move::Predict(p) => {
                        if !self.seen.contains(&p.explanation) {
                            return Err(format!(
                                "learner explained t={t} with unknown example {}",
                                p.explanation
                            ));
                        }
                        WireMessage::Prediction {
                            t,
                            label: Some(p.label.clone()),
                            explanation_id: Some(p.explanation),
                        }
                    }
                };
                self.writer.send(&reply).map_err(|e| e.to_string())?;
                self.seen.insert(t);
                self.last_t = Some(t);
                self.rounds += 1;
                self.pending = Some(Pending { inst, mv });
                Ok(false)
            }
            WireMessage::Feedback {
                t,
                label,
                feature,
                polarity,
            } => {
                match &self.pending {
                    Some(p) if p.inst.t == t => {}
                    Some(p) => {
                        return Err(format!("feedback for t={t} while t={} is open", p.inst.t))
                    }
                    None => return Err(format!("feedback for t={t} without a prediction")),
                }
                let literal = match (feature, polarity) {
                    (Some(f), Some(pol)) => Some(Literal::new(f, pol)),
                    (None, None) => None,
                    _ => return Err("feature and polarity must come together".into()),
                };
                let fb = Feedback { label, literal };
                self.settle(Some(&fb)).map_err(|e| e.to_string())?;
                Ok(false)
            }
            WireMessage::Ack { t } => {
                match &self.pending {
                    Some(p) if p.inst.t == t => {}
                    _ => return Err(format!("ack for t={t} without a matching prediction")),
                }
                self.settle(None).map_err(|e| e.to_string())?;
                Ok(false)
            }
            WireMessage::SessionEnd { .. } => {
                self.settle(None).map_err(|e| e.to_string())?;
                Ok(true)
            }
            other => Err(format!("unexpected {} from the teacher", other.kind())),
        }
    }
}

fn abort<W: Write>(
    writer: &mut FrameWriter<W>,
    summary: SessionSummary,
) -> Result<SessionSummary, ProtocolError> {
    let _ = writer.send(&WireMessage::SessionEnd {
        mistakes: summary.mistakes,
        error: summary.error.clone(),
    });
    Ok(summary)
}

/// Serves one session: waits for `SessionInit`, builds the learner with
/// `factory`, then answers examples until `SessionEnd`. Protocol violations
/// end the session with an error-carrying `SessionEnd`; only transport
/// failures are returned as errors.
pub fn serve_session<R, W, F>(
    reader: R,
    writer: W,
    factory: F,
) -> Result<SessionSummary, ProtocolError>
where
    R: BufRead,
    W: Write,
    F: FnOnce(&LearnerSpec) -> Result<Box<dyn Learner>, LearnerError>,
{
    let mut reader = FrameReader::new(reader);
    let mut writer = FrameWriter::new(writer);
    let failed = |error: String| SessionSummary {
        learner: String::new(),
        rounds: 0,
        mistakes: 0,
        error: Some(error),
    };
    let (learner, name) = match reader.read() {
        Ok(Some(WireMessage::SessionInit { learner, params })) => {
            let built = spec_from_init(&learner, &params)
                .and_then(|spec| factory(&spec).map_err(ProtocolError::from));
            match built {
                Ok(l) => (l, learner),
                Err(e) => return abort(&mut writer, failed(e.to_string())),
            }
        }
        Ok(Some(other)) => {
            return abort(
                &mut writer,
                failed(format!("expected SessionInit, got {}", other.kind())),
            )
        }
        Ok(None) => return abort(&mut writer, failed("closed before SessionInit".into())),
        Err(ProtocolError::Io(e)) => return Err(e.into()),
        Err(e) => return abort(&mut writer, failed(e.to_string())),
    };

    let mut server = Server {
        writer,
        learner,
        name,
        pending: None,
        last_t: None,
        seen: HashSet::new(),
        rounds: 0,
        mistakes: 0,
    };
    loop {
        let msg = match reader.read() {
            Ok(Some(m)) => m,
            Ok(None) => {
                let s = server.summary(Some("closed without SessionEnd".into()));
                return abort(&mut server.writer, s);
            }
            Err(ProtocolError::Io(e)) => return Err(e.into()),
            Err(e) => {
                let s = server.summary(Some(e.to_string()));
                return abort(&mut server.writer, s);
            }
        };
        match server.handle(msg) {
            Ok(false) => {}
            Ok(true) => {
                let s = server.summary(None);
                server.writer.send(&WireMessage::SessionEnd {
                    mistakes: s.mistakes,
                    error: None,
                })?;
                return Ok(s);
            }
            Err(e) => {
                log::debug!("session aborted: {e}");
                let s = server.summary(Some(e));
                return abort(&mut server.writer, s);
            }
        }
    }
}

/// One session over standard input and output.
pub fn serve_stdio() -> Result<SessionSummary, ProtocolError> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_session(stdin.lock(), stdout.lock(), |s| s.build())
}

/// One session over an accepted connection.
pub fn serve_connection(stream: std::net::TcpStream) -> Result<SessionSummary, ProtocolError> {
    let reader = BufReader::new(stream.try_clone()?);
    serve_session(reader, stream, |s| s.build())
}

/// Accepts connections and serves each on its own thread. Stops after
/// `max_sessions` connections when given.
pub fn serve_tcp(listener: TcpListener, max_sessions: Option<usize>) -> Result<(), ProtocolError> {
    let mut handles = Vec::new();
    for (i, conn) in listener.incoming().enumerate() {
        let stream = conn?;
        let peer = stream.peer_addr().ok();
        handles.push(thread::spawn(move || match serve_connection(stream) {
            Ok(s) => log::info!("session with {peer:?}: {} rounds, {} mistakes", s.rounds, s.mistakes),
            Err(e) => log::warn!("session with {peer:?} failed: {e}"),
        }));
        if max_sessions.is_some_and(|n| i + 1 >= n) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Example;
    use std::io::Cursor;

    fn frames(msgs: &[WireMessage]) -> Vec<u8> {
        msgs.iter()
            .flat_map(|m| super::super::encode(m).unwrap())
            .collect()
    }

    fn replies(out: &[u8]) -> Vec<WireMessage> {
        let mut r = FrameReader::new(Cursor::new(out));
        std::iter::from_fn(|| r.read().unwrap()).collect()
    }

    fn run(msgs: &[WireMessage]) -> (SessionSummary, Vec<WireMessage>) {
        let input = frames(msgs);
        let mut out = Vec::new();
        let s = serve_session(Cursor::new(input), &mut out, |s| s.build()).unwrap();
        (s, replies(&out))
    }

    fn init() -> WireMessage {
        WireMessage::init(&LearnerSpec::Srdff { m: 2 })
    }

    fn ex(t: usize, bits: &[bool]) -> WireMessage {
        WireMessage::Example {
            t,
            assignment: Example::from_bools(bits),
        }
    }

    #[test]
    fn empty_session_reports_zero_mistakes() {
        let (s, out) = run(&[init(), WireMessage::SessionEnd { mistakes: 0, error: None }]);
        assert_eq!(s.error, None);
        assert_eq!(out, vec![WireMessage::SessionEnd { mistakes: 0, error: None }]);
    }

    #[test]
    fn first_example_is_a_query() {
        let (s, out) = run(&[
            init(),
            ex(0, &[true]),
            WireMessage::Feedback {
                t: 0,
                label: "A".into(),
                feature: None,
                polarity: None,
            },
            ex(1, &[false]),
            WireMessage::Ack { t: 1 },
            WireMessage::SessionEnd { mistakes: 0, error: None },
        ]);
        assert_eq!(s.rounds, 2);
        assert_eq!(
            out[0],
            WireMessage::Prediction {
                t: 0,
                label: None,
                explanation_id: None
            }
        );
        assert_eq!(
            out[1],
            WireMessage::Prediction {
                t: 1,
                label: Some("A".into()),
                explanation_id: Some(0)
            }
        );
        assert_eq!(out[2], WireMessage::SessionEnd { mistakes: 0, error: None });
    }

    #[test]
    fn feedback_on_correct_prediction_aborts() {
        let (s, out) = run(&[
            init(),
            ex(0, &[true]),
            WireMessage::Feedback {
                t: 0,
                label: "A".into(),
                feature: None,
                polarity: None,
            },
            ex(1, &[true]),
            WireMessage::Feedback {
                t: 1,
                label: "A".into(),
                feature: Some(0),
                polarity: Some(true),
            },
            WireMessage::SessionEnd { mistakes: 0, error: None },
        ]);
        assert!(s.error.is_some());
        assert!(matches!(out.last(), Some(WireMessage::SessionEnd { error: Some(_), .. })));
    }

    #[test]
    fn out_of_order_examples_abort() {
        let (s, _) = run(&[
            init(),
            ex(3, &[true]),
            WireMessage::Feedback {
                t: 3,
                label: "A".into(),
                feature: None,
                polarity: None,
            },
            ex(3, &[true]),
        ]);
        assert!(s.error.unwrap().contains("does not follow"));
    }

    #[test]
    fn missing_init_and_garbage_abort() {
        let (s, _) = run(&[ex(0, &[true])]);
        assert!(s.error.unwrap().contains("SessionInit"));
        let mut out = Vec::new();
        let mut input = frames(&[init()]);
        input.extend_from_slice(b"{\"type\":\"Example\",\"t\":0,\"assign");
        let s = serve_session(Cursor::new(input), &mut out, |s| s.build()).unwrap();
        assert!(s.error.is_some());
        assert!(matches!(replies(&out).last(), Some(WireMessage::SessionEnd { error: Some(_), .. })));
    }

    #[test]
    fn unknown_learner_is_rejected() {
        let (s, _) = run(&[WireMessage::SessionInit {
            learner: "perceptron".into(),
            params: Default::default(),
        }]);
        assert!(s.error.is_some());
    }
}
