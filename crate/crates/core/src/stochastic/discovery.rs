use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::learners::{Learner, LearnerError, Move, Prediction, Rule, Session, SessionError, Update};
use crate::model::{Designation, Label, Literal, Representation};
use crate::world::{Feedback, Instance, StreamEvent, Transcript};

/// `12 ln(1/(2 delta beta)) / beta`, the stage-one mistake allowance.
pub fn auto_b(beta: f64, delta: f64) -> f64 {
    12.0 * (1.0 / (2.0 * delta * beta)).ln() / beta
}

/// `6 ln(1/(2 delta beta)) / beta`, the count after which frequent
/// features clear the threshold with probability `1 - delta`.
pub fn concentration_count(beta: f64, delta: f64) -> f64 {
    auto_b(beta, delta) / 2.0
}

/// `4 alpha^2 / m^4`.
pub fn default_beta(alpha: f64, m: usize) -> f64 {
    4.0 * alpha * alpha / (m as f64).powi(4)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FeatureCounter {
    pub counts: BTreeMap<Literal, u64>,
    pub total: u64,
}

impl FeatureCounter {
    pub fn add(&mut self, literal: Literal) {
        *self.counts.entry(literal).or_default() += 1;
        self.total += 1;
    }

    pub fn get(&self, literal: &Literal) -> u64 {
        self.counts.get(literal).copied().unwrap_or(0)
    }

    pub fn frequency(&self, literal: &Literal) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.get(literal) as f64 / self.total as f64
        }
    }

    /// `{phi : F(phi) >= beta ||F||_1}` over the features seen at least once.
    pub fn threshold(&self, beta: f64) -> BTreeSet<Literal> {
        self.counts
            .iter()
            .filter(|(_, &c)| c > 0 && c as f64 >= beta * self.total as f64)
            .map(|(l, _)| *l)
            .collect()
    }
}

#[derive(Clone, Debug)]
enum Phase {
    Outer,
    Inner { t: usize, label: Label },
}

/// Collects a feedback feature from each fresh baseline: predict `y0`,
/// take the true label as the baseline, then repeat that baseline until the
/// teacher objects and count the feature it names.
#[derive(Clone, Debug)]
pub struct FeatureDiscovery {
    designation: Designation,
    b: f64,
    beta: f64,
    anchor: Option<(usize, Label)>,
    phase: Phase,
    counter: FeatureCounter,
    mistakes: u64,
    rounds: usize,
}

impl FeatureDiscovery {
    pub fn new(designation: Designation, b: f64, beta: f64) -> Result<Self, LearnerError> {
        if !(b >= 2.0) {
            return Err(LearnerError::Params(format!("b = {b} must be at least 2")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(LearnerError::Params(format!("beta = {beta} must lie in (0, 1)")));
        }
        Ok(FeatureDiscovery {
            designation,
            b,
            beta,
            anchor: None,
            phase: Phase::Outer,
            counter: FeatureCounter::default(),
            mistakes: 0,
            rounds: 0,
        })
    }

    pub fn anchor(&self) -> Option<&(usize, Label)> {
        self.anchor.as_ref()
    }

    pub fn counter(&self) -> &FeatureCounter {
        &self.counter
    }

    pub fn mistakes(&self) -> u64 {
        self.mistakes
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// True once no further baseline may start.
    pub fn done(&self) -> bool {
        matches!(self.phase, Phase::Outer)
            && self.anchor.is_some()
            && !(self.counter.total as f64 <= self.b / 2.0 && (self.mistakes + 2) as f64 <= self.b)
    }

    /// Stopped before the count passed `b/2`.
    pub fn under_sampled(&self) -> bool {
        self.counter.total as f64 <= self.b / 2.0
    }

    pub fn phi_hat(&self) -> BTreeSet<Literal> {
        self.counter.threshold(self.beta)
    }
}

impl Learner for FeatureDiscovery {
    fn name(&self) -> &'static str {
        "feature_discovery"
    }

    fn predict(&mut self, x: &Instance) -> Result<Move, LearnerError> {
        let Some((t0, y0)) = &self.anchor else {
            return Ok(Move::Query);
        };
        if self.done() {
            return Err(LearnerError::Other(format!(
                "round {}: feature discovery already finished",
                x.t
            )));
        }
        let (label, explanation) = match &self.phase {
            Phase::Outer => (y0.clone(), *t0),
            Phase::Inner { t, label } => (label.clone(), *t),
        };
        Ok(Move::Predict(Prediction { label, explanation }))
    }

    fn absorb(
        &mut self,
        x: &Instance,
        mv: &Move,
        feedback: Option<&Feedback>,
    ) -> Result<Update, LearnerError> {
        self.rounds += 1;
        let p = match mv {
            Move::Query => {
                let fb = feedback.ok_or(LearnerError::MissingLabel { t: x.t })?;
                self.anchor = Some((x.t, fb.label.clone()));
                return Ok(Update::Anchored);
            }
            Move::Predict(p) => p,
        };
        if feedback.is_some() {
            self.mistakes += 1;
        }
        match &self.phase {
            Phase::Outer => {
                let label = feedback.map_or_else(|| p.label.clone(), |f| f.label.clone());
                self.phase = Phase::Inner { t: x.t, label };
            }
            Phase::Inner { .. } => {
                if let Some(fb) = feedback {
                    if let Some(lit) = fb.literal {
                        self.counter.add(self.designation.positive(lit));
                    }
                    self.phase = Phase::Outer;
                }
            }
        }
        Ok(Update::None)
    }

    fn rules(&self) -> &[Rule] {
        &[]
    }
}

#[derive(Clone, Debug)]
pub struct DiscoveryOutcome {
    pub phi_hat: BTreeSet<Literal>,
    pub counter: FeatureCounter,
    pub mistakes: u64,
    pub rounds: usize,
    pub under_sampled: bool,
    pub transcript: Transcript,
}

/// Runs discovery until it stops or the stream runs out.
pub fn feature_discovery(
    stream: &[StreamEvent],
    world: &Representation,
    b: f64,
    beta: f64,
) -> Result<DiscoveryOutcome, SessionError> {
    let mut learner = FeatureDiscovery::new(world.designation(), b, beta)
        .map_err(|source| SessionError::Learner { t: 0, source })?;
    let mut session = Session::new(world);
    for event in stream {
        if learner.done() {
            break;
        }
        session.step(&mut learner, event)?;
    }
    Ok(DiscoveryOutcome {
        phi_hat: learner.phi_hat(),
        under_sampled: learner.under_sampled(),
        mistakes: learner.mistakes,
        rounds: learner.rounds,
        counter: learner.counter,
        transcript: session.into_transcript(),
    })
}
