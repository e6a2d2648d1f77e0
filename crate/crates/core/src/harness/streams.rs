use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::learners::{Learner, Session, SrDff};
use crate::model::Representation;
use crate::rng::{self, derive};
use crate::world::stream::{draw_corruption, pick};
use crate::world::{
    adversarial_stream, generate_world, CorruptionKind, ExceptionPlan, ExceptionSpec, Hidden,
    ScriptRound, StreamEvent, WorldGenParams,
};

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    /// Uniform components, exceptions at uniform rounds.
    Random,
    /// Components in round-robin order.
    Cyclic,
    /// Uniform components, exceptions on the first `k` rounds.
    EarlyExceptions,
    /// Picks, when it can, a component a shadow SR-DFF gets wrong.
    Adaptive,
}

impl StreamKind {
    pub const ALL: [StreamKind; 4] = [
        StreamKind::Random,
        StreamKind::Cyclic,
        StreamKind::EarlyExceptions,
        StreamKind::Adaptive,
    ];

    pub fn for_trial(trial: usize) -> Self {
        Self::ALL[trial % 4]
    }
}

/// Parameters of a random small world. With `unique` every component gets
/// its own label.
pub fn trial_world_params(m: usize, seed: u64, unique: bool) -> WorldGenParams {
    let mut rng = rng::seeded(derive(seed, 1));
    let label_count = if unique { m } else { rng.gen_range(1..=m) };
    WorldGenParams {
        m,
        label_count,
        labels: None,
        pool_size: rng.gen_range(2..=4),
        noise_features: rng.gen_range(0..=3),
        unique_labels: unique,
        overlap: rng.gen_range(0..=1),
        seed: derive(seed, 2),
    }
}

pub fn trial_world(m: usize, seed: u64, unique: bool) -> Result<Representation, HarnessError> {
    Ok(generate_world(&trial_world_params(m, seed, unique))?)
}

/// `len` rounds with exactly `min(k, len)` injected exceptions.
pub fn trial_stream(
    world: &Representation,
    kind: StreamKind,
    len: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<StreamEvent>, HarnessError> {
    let mut rng = rng::seeded(derive(seed, 3));
    let m = world.m();
    let k = k.min(len);
    let rounds: BTreeSet<usize> = match kind {
        StreamKind::EarlyExceptions => (0..k).collect(),
        _ => index::sample(&mut rng, len, k).into_iter().collect(),
    };
    if kind == StreamKind::Adaptive {
        return adaptive_stream(world, len, &rounds, derive(seed, 4));
    }
    let script: Vec<ScriptRound> = (0..len)
        .map(|t| {
            let c = match kind {
                StreamKind::Cyclic => t % m,
                _ => rng.gen_range(0..m),
            };
            ScriptRound::component(c)
        })
        .collect();
    let spec = ExceptionSpec::at(rounds, CorruptionKind::Mixed);
    Ok(adversarial_stream(world, &script, &spec, derive(seed, 5))?)
}

fn adaptive_stream(
    world: &Representation,
    len: usize,
    exceptions: &BTreeSet<usize>,
    seed: u64,
) -> Result<Vec<StreamEvent>, HarnessError> {
    let mut rng = rng::seeded(seed);
    let mut shadow = SrDff::new(world.m())?;
    let mut session = Session::new(world);
    let mut events = Vec::with_capacity(len);
    let mut order: Vec<usize> = (0..world.m()).collect();
    for t in 0..len {
        order.shuffle(&mut rng);
        let mut chosen = None;
        for &c in &order {
            let x = pick(world, c, &mut rng);
            let (mv, _) = shadow.peek(&x)?;
            chosen = Some((c, x));
            if mv.predicted() != Some(world.label(c)) {
                break;
            }
        }
        let (component, example) = chosen.expect("at least one component");
        let exception = exceptions.contains(&t).then(|| {
            ExceptionPlan::Corrupt(draw_corruption(
                world,
                component,
                CorruptionKind::Mixed,
                &mut rng,
            ))
        });
        let event = StreamEvent {
            t,
            example,
            hidden: Hidden {
                component,
                exception,
            },
        };
        session.step(&mut shadow, &event)?;
        events.push(event);
    }
    debug_assert!(shadow.rules().len() <= world.m() + exceptions.len());
    Ok(events)
}

/// World and stream for one trial of the adversarial suites.
#[derive(Clone, Debug)]
pub struct TrialSetup {
    pub world: Representation,
    pub stream: Vec<StreamEvent>,
    pub kind: StreamKind,
    pub seed: u64,
}

/// Stream length for the hard-bound suites: a few times the bound, so
/// learners get room to exhaust it.
pub fn hard_len(m: usize, k: usize, seed: u64) -> usize {
    let mut rng = rng::seeded(derive(seed, 6));
    10 + 3 * (m * m + m * k) + rng.gen_range(0..=2 * m)
}

/// Stream length for the expectation suite, scaled by its bound.
pub fn expectation_len(m: usize, k: usize, seed: u64) -> usize {
    let mut rng = rng::seeded(derive(seed, 6));
    10 + 4 * (2 * m * (m - 1) + 6 * k) + rng.gen_range(0..=2 * m)
}

pub fn hard_setup(m: usize, k: usize, trial: usize, seed: u64) -> Result<TrialSetup, HarnessError> {
    let world = trial_world(m, seed, false)?;
    let kind = StreamKind::for_trial(trial);
    let stream = trial_stream(&world, kind, hard_len(m, k, seed), k, seed)?;
    Ok(TrialSetup {
        world,
        stream,
        kind,
        seed,
    })
}

pub fn unique_label_setup(
    m: usize,
    k: usize,
    trial: usize,
    seed: u64,
) -> Result<TrialSetup, HarnessError> {
    let world = trial_world(m, seed, true)?;
    let kind = StreamKind::for_trial(trial);
    let stream = trial_stream(&world, kind, expectation_len(m, k, seed), k, seed)?;
    Ok(TrialSetup {
        world,
        stream,
        kind,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_carry_exactly_k_exceptions() {
        for (i, kind) in StreamKind::ALL.into_iter().enumerate() {
            let w = trial_world(3, i as u64, false).unwrap();
            let s = trial_stream(&w, kind, 40, 3, 7).unwrap();
            assert_eq!(s.len(), 40);
            assert_eq!(s.iter().filter(|e| e.injected()).count(), 3, "{kind:?}");
            assert!(s.iter().enumerate().all(|(t, e)| e.t == t));
        }
        let w = trial_world(2, 0, false).unwrap();
        let s = trial_stream(&w, StreamKind::EarlyExceptions, 10, 2, 1).unwrap();
        assert!(s[0].injected() && s[1].injected() && !s[2].injected());
    }

    #[test]
    fn setups_replay() {
        let a = hard_setup(4, 2, 3, 99).unwrap();
        let b = hard_setup(4, 2, 3, 99).unwrap();
        assert_eq!(a.stream, b.stream);
        assert_eq!(a.kind, StreamKind::Adaptive);
    }

    #[test]
    fn unique_worlds_have_m_labels() {
        let s = unique_label_setup(4, 1, 0, 5).unwrap();
        assert_eq!(s.world.labels().len(), 4);
    }
}
