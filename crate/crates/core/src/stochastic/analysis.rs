use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::model::{Literal, Representation};
use crate::world::{StochasticSource, WorldError};

/// Ground-truth feature masses of a source over a world.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DistributionAnalysis {
    /// Unordered differently-labeled component pairs each positive
    /// feature separates.
    pub pair_sets: BTreeMap<Literal, BTreeSet<(usize, usize)>>,
    /// `beta[phi] = sum over {G, G'} in P_phi of P[G] P[G']`.
    pub beta: BTreeMap<Literal, BigRational>,
}

impl DistributionAnalysis {
    pub fn total(&self) -> BigRational {
        self.beta.values().sum()
    }
}

pub fn analyze_distribution(
    world: &Representation,
    source: &StochasticSource,
) -> Result<DistributionAnalysis, WorldError> {
    source.check_world(world)?;
    let mut out = DistributionAnalysis::default();
    for (i, j) in world.differing_pairs() {
        let Some(phi) = world.phi(i, j) else {
            continue;
        };
        let key = world.positive(phi);
        out.pair_sets.entry(key).or_default().insert((i, j));
        *out.beta.entry(key).or_insert_with(BigRational::zero) +=
            source.clean_mass(i) * source.clean_mass(j);
    }
    Ok(out)
}

/// `{phi : beta_phi >= beta}`.
pub fn phi_beta(analysis: &DistributionAnalysis, beta: &BigRational) -> BTreeSet<Literal> {
    analysis
        .beta
        .iter()
        .filter(|(_, b)| *b >= beta)
        .map(|(l, _)| *l)
        .collect()
}

/// `m log2 m + m^2 log2(3/beta)`.
pub fn capacity_bound(m: usize, beta: f64) -> f64 {
    let m = m as f64;
    m * m.log2() + m * m * (3.0 / beta).log2()
}

/// `log2` of the enumeration bound `(2/beta + 1)^(m(m-1)) m^m`.
pub fn enumeration_bound_log2(m: usize, beta: f64) -> f64 {
    let mf = m as f64;
    mf * (mf - 1.0) * (2.0 / beta + 1.0).log2() + mf * mf.log2()
}

/// Number of non-contradictory conjunctions of at most `max_len` literals
/// over `features` features.
pub fn conjunction_count(features: usize, max_len: usize) -> BigUint {
    let mut total = BigUint::zero();
    let mut binom = BigUint::one();
    for s in 0..=max_len.min(features) {
        if s > 0 {
            binom = binom * BigUint::from(features - s + 1) / BigUint::from(s);
        }
        total += &binom << s;
    }
    total
}

/// Size of the enumerated class: a default label plus up to `m` rules,
/// each a conjunction of at most `m - 1` literals with one of `labels`.
pub fn hypothesis_count(m: usize, features: usize, labels: usize) -> BigUint {
    let per_rule = conjunction_count(features, m.saturating_sub(1)) * BigUint::from(labels);
    let mut total = BigUint::zero();
    let mut power = BigUint::one();
    for _ in 0..=m {
        total += &power;
        power *= &per_rule;
    }
    total * BigUint::from(labels)
}

pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap_or(0.0).log2() + shift as f64
}

pub(crate) fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn from_usize(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, CorruptionKind, WorldGenParams};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn single_pair_mass_is_the_product() {
        let w = generate_world(&WorldGenParams {
            m: 3,
            labels: Some(vec!["A".into(), "B".into(), "A".into()]),
            label_count: 2,
            ..WorldGenParams::default()
        })
        .unwrap();
        // P[G1] = 1/2, P[G2] = 1/4, P[G3] = 1/4
        let src = StochasticSource::new(
            vec![q(1, 2), q(1, 4), q(1, 4)],
            vec![BigRational::zero(); 3],
            CorruptionKind::Both,
        )
        .unwrap();
        let a = analyze_distribution(&w, &src).unwrap();
        let f01 = w.positive(w.phi(0, 1).unwrap());
        assert_eq!(a.beta[&f01], q(1, 8));
        assert!(a.total() <= q(1, 2));
    }

    #[test]
    fn one_component_has_nothing_to_separate() {
        let w = generate_world(&WorldGenParams {
            m: 1,
            label_count: 1,
            ..WorldGenParams::default()
        })
        .unwrap();
        let src = StochasticSource::from_counts(&[1], BigRational::zero(), CorruptionKind::Both)
            .unwrap();
        let a = analyze_distribution(&w, &src).unwrap();
        assert!(a.beta.is_empty() && a.pair_sets.is_empty());
    }

    #[test]
    fn threshold_set() {
        let mut a = DistributionAnalysis::default();
        a.beta.insert(Literal::pos(1), q(1, 8));
        a.beta.insert(Literal::pos(2), q(1, 50));
        assert_eq!(phi_beta(&a, &q(1, 20)), [Literal::pos(1)].into_iter().collect());
        assert!(phi_beta(&a, &BigRational::one()).is_empty());
        assert_eq!(phi_beta(&a, &q(1, 1_000_000)).len(), 2);
    }

    #[test]
    fn capacity_values() {
        assert!((capacity_bound(1, 0.5) - 6f64.log2()).abs() < 1e-12);
        assert!((capacity_bound(2, 1.0) - (2.0 + 4.0 * 3f64.log2())).abs() < 1e-12);
        assert!(capacity_bound(3, 0.1) > capacity_bound(3, 0.2));
    }

    #[test]
    fn counts_match_direct_enumeration() {
        // over 2 features, conjunctions of <= 1 literal: {}, +0, -0, +1, -1
        assert_eq!(conjunction_count(2, 1), BigUint::from(5u32));
        // <= 2 literals adds the 4 consistent pairs
        assert_eq!(conjunction_count(2, 2), BigUint::from(9u32));
        assert_eq!(conjunction_count(0, 3), BigUint::one());
        // m = 1: rules have empty conjunctions; 2 labels, 0 or 1 rule, 2 defaults
        assert_eq!(hypothesis_count(1, 4, 2), BigUint::from(6u32));
    }

    #[test]
    fn log2_of_large_integers() {
        let x = BigUint::one() << 2000u32;
        assert!((log2_big(&x) - 2000.0).abs() < 1e-9);
        assert_eq!(log2_big(&BigUint::from(8u32)), 3.0);
    }
}
