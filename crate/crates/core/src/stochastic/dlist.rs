use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::model::{Conjunction, Example, Label, ModelError, Representation};
use crate::world::{CorruptionKind, StochasticSource, WorldError};

/// Decision list with a fallback label for examples no rule matches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictedDecisionList {
    pub rules: Vec<(Conjunction, Label)>,
    pub default: Label,
}

impl RestrictedDecisionList {
    pub fn constant(label: Label) -> Self {
        RestrictedDecisionList {
            rules: Vec::new(),
            default: label,
        }
    }

    pub fn predict(&self, x: &Example) -> Result<&Label, ModelError> {
        for (conj, label) in &self.rules {
            if conj.satisfied_by(x)? {
                return Ok(label);
            }
        }
        Ok(&self.default)
    }

    /// Whether this list lies in the class with at most `m` rules of at
    /// most `m - 1` literals each.
    pub fn within(&self, m: usize) -> bool {
        self.rules.len() <= m && self.rules.iter().all(|(c, _)| c.len() < m.max(1))
    }
}

impl fmt::Display for RestrictedDecisionList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (conj, label) in &self.rules {
            write!(f, "{conj} -> {label}; ")?;
        }
        write!(f, "else {}", self.default)
    }
}

pub type Sample = [(Arc<Example>, Label)];

/// Fraction of `sample` that `h` gets wrong.
pub fn eval_error_sample(h: &RestrictedDecisionList, sample: &Sample) -> Result<BigRational, ModelError> {
    if sample.is_empty() {
        return Ok(BigRational::zero());
    }
    let mut wrong = 0u64;
    for (x, y) in sample {
        if h.predict(x)? != y {
            wrong += 1;
        }
    }
    Ok(BigRational::new(
        BigInt::from(wrong),
        BigInt::from(sample.len() as u64),
    ))
}

fn flip_probability(kind: CorruptionKind) -> BigRational {
    match kind {
        CorruptionKind::WrongLabel | CorruptionKind::Both => BigRational::one(),
        CorruptionKind::WrongFeature => BigRational::zero(),
        CorruptionKind::Mixed => BigRational::new(2.into(), 3.into()),
    }
}

/// Exact label law of one draw: `(probability of the observed label, mass)`
/// pairs for an example of component `c`, including exception flips.
pub(crate) fn label_law(
    world: &Representation,
    source: &StochasticSource,
    c: usize,
) -> Vec<(Label, BigRational)> {
    let truth = world.label(c).clone();
    let eps = &source.epsilon[c];
    let flip = eps * flip_probability(source.corruption);
    let mut law = vec![(truth.clone(), BigRational::one() - &flip)];
    if flip.is_zero() {
        return law;
    }
    let others: Vec<Label> = world.labels().into_iter().filter(|l| *l != truth).collect();
    if others.is_empty() {
        law.push((Label::new(&format!("~{truth}")), flip));
    } else {
        let share = flip / BigRational::from_integer(BigInt::from(others.len()));
        law.extend(others.into_iter().map(|l| (l, share.clone())));
    }
    law
}

/// Every possible draw: `(example, component mass share, label law)`.
pub(crate) fn draws(
    world: &Representation,
    source: &StochasticSource,
) -> Vec<(Arc<Example>, BigRational, Vec<(Label, BigRational)>)> {
    let mut out = Vec::new();
    for (c, comp) in world.components().iter().enumerate() {
        let law = label_law(world, source, c);
        let share = &source.weights[c] / BigRational::from_integer(BigInt::from(comp.pool.len()));
        for x in &comp.pool {
            out.push((x.clone(), share.clone(), law.clone()));
        }
    }
    out
}

/// `err(h, D) = P[h(X) != Y]`, computed exactly over the finite pools.
pub fn eval_error_exact(
    h: &RestrictedDecisionList,
    world: &Representation,
    source: &StochasticSource,
) -> Result<BigRational, WorldError> {
    source.check_world(world)?;
    let mut err = BigRational::zero();
    for (x, mass, law) in draws(world, source) {
        let y = h.predict(&x)?;
        let hit: BigRational = law
            .iter()
            .filter(|(l, _)| l == y)
            .map(|(_, p)| p.clone())
            .sum();
        err += mass * (BigRational::one() - hit);
    }
    Ok(err)
}

/// The error no labeling function can avoid: per draw, one minus the
/// largest label probability.
pub fn irreducible_error(
    world: &Representation,
    source: &StochasticSource,
) -> Result<BigRational, WorldError> {
    source.check_world(world)?;
    let mut err = BigRational::zero();
    for (_, mass, law) in draws(world, source) {
        let best = law
            .iter()
            .map(|(_, p)| p.clone())
            .max()
            .unwrap_or_else(BigRational::zero);
        err += mass * (BigRational::one() - best);
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Literal;
    use crate::world::{generate_world, WorldGenParams};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn world2() -> Representation {
        generate_world(&WorldGenParams {
            m: 2,
            pool_size: 2,
            ..WorldGenParams::default()
        })
        .unwrap()
    }

    #[test]
    fn constant_correct_label_on_one_label_source() {
        let w = generate_world(&WorldGenParams {
            m: 1,
            label_count: 1,
            ..WorldGenParams::default()
        })
        .unwrap();
        let src = StochasticSource::from_counts(&[1], BigRational::zero(), CorruptionKind::Both)
            .unwrap();
        let h = RestrictedDecisionList::constant(w.label(0).clone());
        assert!(eval_error_exact(&h, &w, &src).unwrap().is_zero());
    }

    #[test]
    fn hand_computed_two_component_error() {
        let w = world2();
        // weights 1/4, 3/4; eps 1/10 with label flips
        let src = StochasticSource::from_counts(&[1, 3], q(1, 10), CorruptionKind::WrongLabel)
            .unwrap();
        // always predicting A: wrong on clean B (3/4 * 9/10) and flipped A (1/4 * 1/10)
        let h = RestrictedDecisionList::constant("A".into());
        assert_eq!(
            eval_error_exact(&h, &w, &src).unwrap(),
            q(3, 4) * q(9, 10) + q(1, 4) * q(1, 10)
        );
        // the perfect list pays exactly the flip mass
        let perfect = RestrictedDecisionList {
            rules: vec![([Literal::pos(0)].into_iter().collect(), "A".into())],
            default: "B".into(),
        };
        assert_eq!(eval_error_exact(&perfect, &w, &src).unwrap(), q(1, 10));
        assert_eq!(irreducible_error(&w, &src).unwrap(), q(1, 10));
    }

    #[test]
    fn feature_only_corruption_leaves_labels_alone() {
        let w = world2();
        let src = StochasticSource::from_counts(&[1, 1], q(1, 5), CorruptionKind::WrongFeature)
            .unwrap();
        assert!(irreducible_error(&w, &src).unwrap().is_zero());
    }

    #[test]
    fn sample_error_counts_mistakes() {
        let w = world2();
        let a = w.components()[0].pool[0].clone();
        let b = w.components()[1].pool[0].clone();
        let sample = vec![(a.clone(), "A".into()), (b.clone(), "B".into()), (b, "A".into())];
        let h = RestrictedDecisionList::constant("A".into());
        assert_eq!(eval_error_sample(&h, &sample).unwrap(), q(1, 3));
    }
}
