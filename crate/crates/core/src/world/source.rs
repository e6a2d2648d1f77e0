use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng as _;

use super::stream::{draw_corruption, pick};
use super::{CorruptionKind, ExceptionPlan, Hidden, StreamEvent, WorldError};
use crate::model::Representation;
use crate::rng;

/// An i.i.d. source: pick a component by weight, then a pool example
/// uniformly; the draw is an exception with the component's rate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StochasticSource {
    pub weights: Vec<BigRational>,
    pub epsilon: Vec<BigRational>,
    pub corruption: CorruptionKind,
}

pub(crate) fn rational(x: f64) -> Result<BigRational, WorldError> {
    BigRational::from_float(x).ok_or_else(|| WorldError::Params(format!("{x} is not finite")))
}

impl StochasticSource {
    pub fn new(
        weights: Vec<BigRational>,
        epsilon: Vec<BigRational>,
        corruption: CorruptionKind,
    ) -> Result<Self, WorldError> {
        if weights.is_empty() || weights.len() != epsilon.len() {
            return Err(WorldError::Params(
                "need one weight and one exception rate per component".into(),
            ));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(WorldError::Params("weights must be non-negative".into()));
        }
        let total: BigRational = weights.iter().sum();
        if !total.is_one() {
            return Err(WorldError::Params(format!("weights sum to {total}, not 1")));
        }
        if epsilon.iter().any(|e| e.is_negative() || *e >= BigRational::one()) {
            return Err(WorldError::Params("exception rates must lie in [0, 1)".into()));
        }
        Ok(StochasticSource {
            weights,
            epsilon,
            corruption,
        })
    }

    /// Integer weights normalised by their sum, one shared rate.
    pub fn from_counts(
        counts: &[u64],
        epsilon: BigRational,
        corruption: CorruptionKind,
    ) -> Result<Self, WorldError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(WorldError::Params("weights sum to 0".into()));
        }
        let weights = counts
            .iter()
            .map(|&c| BigRational::new(BigInt::from(c), BigInt::from(total)))
            .collect();
        Self::new(weights, vec![epsilon; counts.len()], corruption)
    }

    /// Floating-point weights, normalised after exact conversion.
    pub fn from_f64(
        weights: &[f64],
        epsilon: f64,
        corruption: CorruptionKind,
    ) -> Result<Self, WorldError> {
        let w: Vec<BigRational> = weights.iter().map(|&x| rational(x)).collect::<Result<_, _>>()?;
        let total: BigRational = w.iter().sum();
        if total.is_zero() {
            return Err(WorldError::Params("weights sum to 0".into()));
        }
        let w = w.into_iter().map(|x| x / &total).collect();
        Self::new(w, vec![rational(epsilon)?; weights.len()], corruption)
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    /// `P[G] = weight(G) * (1 - eps(G))`.
    pub fn clean_mass(&self, component: usize) -> BigRational {
        &self.weights[component] * (BigRational::one() - &self.epsilon[component])
    }

    /// `P[Ex]`, the overall exception rate.
    pub fn exception_rate(&self) -> BigRational {
        self.weights
            .iter()
            .zip(&self.epsilon)
            .map(|(w, e)| w * e)
            .sum()
    }

    pub fn check_world(&self, world: &Representation) -> Result<(), WorldError> {
        if world.m() != self.m() {
            return Err(WorldError::Params(format!(
                "source has {} weights, world has {} components",
                self.m(),
                world.m()
            )));
        }
        Ok(())
    }
}

pub fn stochastic_stream(
    world: &Representation,
    source: &StochasticSource,
    n: usize,
    seed: u64,
) -> Result<Vec<StreamEvent>, WorldError> {
    source.check_world(world)?;
    let mut rng = rng::seeded(seed);
    let mut cumulative = Vec::with_capacity(source.m());
    let mut acc = 0.0;
    for w in &source.weights {
        acc += w.to_f64().unwrap_or(0.0);
        cumulative.push(acc);
    }
    let eps: Vec<f64> = source
        .epsilon
        .iter()
        .map(|e| e.to_f64().unwrap_or(0.0))
        .collect();
    let mut events = Vec::with_capacity(n);
    for t in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        let component = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(source.m() - 1);
        let example = pick(world, component, &mut rng);
        let exception = (eps[component] > 0.0 && rng.gen_bool(eps[component])).then(|| {
            ExceptionPlan::Corrupt(draw_corruption(
                world,
                component,
                source.corruption,
                &mut rng,
            ))
        });
        events.push(StreamEvent {
            t,
            example,
            hidden: Hidden {
                component,
                exception,
            },
        });
    }
    Ok(events)
}
