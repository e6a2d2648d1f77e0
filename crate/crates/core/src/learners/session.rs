use thiserror::Error;

use crate::model::{ModelError, Representation};
use crate::world::{
    round_consistent, teacher_label, teacher_respond, Explained, Feedback, Round, RoundHidden,
    StreamEvent, Transcript,
};

use super::{Learner, LearnerError, Move, Update};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("round {t}: {source}")]
    Learner {
        t: usize,
        #[source]
        source: LearnerError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("expected round {expected}, stream delivered round {got}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("round {t}: explanation {id} is not an earlier round")]
    BadExplanation { t: usize, id: usize },
    #[error("round {t}: label queries are only allowed on the first round")]
    LateQuery { t: usize },
}

#[derive(Clone, Debug)]
pub struct Step {
    pub index: usize,
    pub update: Update,
    /// Whether the teacher's answer agreed with the world.
    pub consistent: bool,
}

/// The round loop, advanced one event at a time.
#[derive(Debug)]
pub struct Session<'w> {
    world: &'w Representation,
    transcript: Transcript,
}

impl<'w> Session<'w> {
    pub fn new(world: &'w Representation) -> Self {
        Session {
            world,
            transcript: Transcript::default(),
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn step<L: Learner + ?Sized>(
        &mut self,
        learner: &mut L,
        event: &StreamEvent,
    ) -> Result<Step, SessionError> {
        let t = self.transcript.rounds.len();
        if event.t != t {
            return Err(SessionError::OutOfOrder {
                expected: t,
                got: event.t,
            });
        }
        let inst = event.instance();
        let wrap = |source| SessionError::Learner { t, source };
        let mv = learner.predict(&inst).map_err(wrap)?;
        let (feedback, explanation_id) = match &mv {
            Move::Query => {
                if t != 0 {
                    return Err(SessionError::LateQuery { t });
                }
                let label = teacher_label(self.world, event)?;
                (
                    Some(Feedback {
                        label,
                        literal: None,
                    }),
                    None,
                )
            }
            Move::Predict(p) => {
                let prev = self
                    .transcript
                    .rounds
                    .get(p.explanation)
                    .ok_or(SessionError::BadExplanation {
                        t,
                        id: p.explanation,
                    })?;
                if prev.observed_label() != Some(&p.label) {
                    log::warn!(
                        "round {t}: explanation {} was observed as {:?}, predicted {}",
                        p.explanation,
                        prev.observed_label(),
                        p.label
                    );
                }
                let fb = teacher_respond(
                    self.world,
                    event,
                    &p.label,
                    Explained {
                        example: &prev.example,
                        component: prev.hidden.component,
                    },
                )?;
                (fb, Some(p.explanation))
            }
        };
        let update = learner
            .absorb(&inst, &mv, feedback.as_ref())
            .map_err(wrap)?;
        let mistake = matches!(mv, Move::Predict(_)) && feedback.is_some();
        let injected = event.injected();
        self.transcript.rounds.push(Round {
            t,
            example: event.example.clone(),
            predicted: mv.predicted().cloned(),
            explanation_id,
            feedback,
            mistake,
            hidden: RoundHidden {
                exception: injected,
                component: event.hidden.component,
            },
            injected,
        });
        let consistent = round_consistent(self.world, &self.transcript.rounds, t);
        self.transcript.rounds[t].hidden.exception = injected || !consistent;
        Ok(Step {
            index: t,
            update,
            consistent,
        })
    }
}

/// Plays a whole stream against `learner`.
pub fn run_session<L: Learner + ?Sized>(
    learner: &mut L,
    stream: &[StreamEvent],
    world: &Representation,
) -> Result<Transcript, SessionError> {
    let mut session = Session::new(world);
    for event in stream {
        session.step(learner, event)?;
    }
    Ok(session.into_transcript())
}
