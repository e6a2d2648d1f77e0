use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::model::{Component, Example, Label, Literal, Representation};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldGenParams {
    pub m: usize,
    pub label_count: usize,
    /// Explicit per-component labels; overrides `label_count`.
    pub labels: Option<Vec<Label>>,
    pub pool_size: usize,
    pub noise_features: usize,
    pub unique_labels: bool,
    /// Shared examples added for every same-labeled component pair.
    pub overlap: usize,
    pub seed: u64,
}

impl Default for WorldGenParams {
    fn default() -> Self {
        WorldGenParams {
            m: 2,
            label_count: 2,
            labels: None,
            pool_size: 3,
            noise_features: 0,
            unique_labels: false,
            overlap: 0,
            seed: 0,
        }
    }
}

impl WorldGenParams {
    fn check(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::Params(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.pool_size == 0 {
            return bad("pool_size must be at least 1".into());
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.m {
                return bad(format!("{} labels given for {} components", labels.len(), self.m));
            }
            if self.unique_labels {
                let mut sorted = labels.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != self.m {
                    return bad("unique_labels requires distinct labels".into());
                }
            }
            return Ok(());
        }
        if self.label_count == 0 || self.label_count > self.m {
            return bad(format!("label_count must be in 1..={}", self.m));
        }
        if self.unique_labels && self.label_count != self.m {
            return bad("unique_labels requires label_count = m".into());
        }
        Ok(())
    }
}

const NOISE_STREAM: u64 = 0x6E6F_6973_6500_0000;

/// Builds a world whose differently-labeled pairs each get a dedicated
/// feature. Pair features come first in the universe, noise features
/// after them. Pair-feature values and noise values use separate random
/// streams, and noise is drawn column by column, so two worlds that differ
/// only in `noise_features` agree on every shared feature.
pub fn generate_world(params: &WorldGenParams) -> Result<Representation, WorldError> {
    params.check()?;
    let m = params.m;
    let mut rng = rng::seeded(params.seed);

    let labels: Vec<Label> = match &params.labels {
        Some(l) => l.clone(),
        None if params.unique_labels => (0..m).map(Label::nth).collect(),
        None => (0..m)
            .map(|c| {
                if c < params.label_count {
                    Label::nth(c)
                } else {
                    Label::nth(rng.gen_range(0..params.label_count))
                }
            })
            .collect(),
    };

    let mut phi = BTreeMap::new();
    let mut pair_of = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if labels[i] != labels[j] {
                let f = pair_of.len() as u32;
                phi.insert((i, j), Literal::pos(f));
                phi.insert((j, i), Literal::neg(f));
                pair_of.push((i, j));
            }
        }
    }
    let pairs = pair_of.len();
    let mut noise = params.noise_features;
    if pairs + noise == 0 {
        noise = 1;
    }

    // Required value of each pair feature for a member of `owners`.
    let pair_row = |owners: &[usize], rng: &mut rng::Rng| -> Vec<bool> {
        pair_of
            .iter()
            .map(|&(i, j)| {
                if owners.contains(&i) {
                    true
                } else if owners.contains(&j) {
                    false
                } else {
                    rng.gen_bool(0.5)
                }
            })
            .collect()
    };

    let mut rows: Vec<(Vec<usize>, Vec<bool>)> = Vec::new();
    for c in 0..m {
        for _ in 0..params.pool_size {
            rows.push((vec![c], pair_row(&[c], &mut rng)));
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            if labels[i] == labels[j] {
                for _ in 0..params.overlap {
                    rows.push((vec![i, j], pair_row(&[i, j], &mut rng)));
                }
            }
        }
    }

    let mut noise_rng = rng::seeded(params.seed ^ NOISE_STREAM);
    let mut values: Vec<Vec<bool>> = rows.iter().map(|(_, v)| v.clone()).collect();
    for _ in 0..noise {
        for row in values.iter_mut() {
            row.push(noise_rng.gen_bool(0.5));
        }
    }

    let mut pools: Vec<Vec<Arc<Example>>> = vec![Vec::new(); m];
    for ((owners, _), row) in rows.iter().zip(values) {
        let x = Arc::new(Example::from_bools(&row));
        for &c in owners {
            pools[c].push(x.clone());
        }
    }
    let components = labels
        .into_iter()
        .zip(pools)
        .map(|(label, pool)| Component { label, pool })
        .collect();
    Ok(Representation::new(pairs + noise, components, phi)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_representation;

    fn params(m: usize, labels: &[&str]) -> WorldGenParams {
        WorldGenParams {
            m,
            labels: Some(labels.iter().map(|&s| Label::new(s)).collect()),
            ..WorldGenParams::default()
        }
    }

    #[test]
    fn two_labels_one_pair_feature() {
        let rep = generate_world(&params(2, &["A", "B"])).unwrap();
        assert_eq!(rep.pair_features().len(), 1);
        let pooled: usize = rep.components().iter().map(|c| c.pool.len()).sum();
        assert_eq!(pooled, 6);
        assert!(validate_representation(&rep, &[]).is_valid());
    }

    #[test]
    fn single_component_has_empty_table() {
        let p = WorldGenParams {
            m: 1,
            label_count: 1,
            ..WorldGenParams::default()
        };
        let rep = generate_world(&p).unwrap();
        assert!(rep.phi_table().is_empty());
        assert!(rep.universe() >= 1);
    }

    #[test]
    fn pair_features_only_for_differently_labeled_pairs() {
        let rep = generate_world(&params(3, &["A", "A", "B"])).unwrap();
        assert_eq!(rep.pair_features().len(), 2);
        assert_eq!(rep.differing_pairs(), vec![(0, 2), (1, 2)]);
        assert!(validate_representation(&rep, &[]).is_valid());
    }

    #[test]
    fn zero_pool_is_rejected() {
        let p = WorldGenParams {
            pool_size: 0,
            ..WorldGenParams::default()
        };
        assert!(matches!(generate_world(&p), Err(WorldError::Params(_))));
    }

    #[test]
    fn unique_labels_need_one_label_per_component() {
        let p = WorldGenParams {
            m: 3,
            label_count: 2,
            unique_labels: true,
            ..WorldGenParams::default()
        };
        assert!(generate_world(&p).is_err());
    }

    #[test]
    fn overlap_shares_examples_between_same_label_components() {
        let p = WorldGenParams {
            overlap: 2,
            ..params(3, &["A", "A", "B"])
        };
        let rep = generate_world(&p).unwrap();
        let shared = rep.components()[0]
            .pool
            .iter()
            .filter(|x| rep.components()[1].pool.contains(x))
            .count();
        assert!(shared >= 2);
        assert!(validate_representation(&rep, &[]).is_valid());
    }

    #[test]
    fn noise_does_not_disturb_shared_features() {
        let base = WorldGenParams {
            m: 4,
            label_count: 3,
            seed: 11,
            ..WorldGenParams::default()
        };
        let quiet = generate_world(&base).unwrap();
        let loud = generate_world(&WorldGenParams {
            noise_features: 50,
            ..base.clone()
        })
        .unwrap();
        assert_eq!(loud.universe(), quiet.universe() + 50);
        assert_eq!(quiet.phi_table(), loud.phi_table());
        for (a, b) in quiet.components().iter().zip(loud.components()) {
            for (x, y) in a.pool.iter().zip(&b.pool) {
                assert_eq!(x.to_bools()[..], y.to_bools()[..quiet.universe()]);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn generated_worlds_satisfy_every_axiom(
                m in 1usize..7,
                labels in 1usize..7,
                pool in 1usize..5,
                noise in 0usize..5,
                overlap in 0usize..2,
                seed in any::<u64>(),
            ) {
                let p = WorldGenParams {
                    m,
                    label_count: labels.min(m),
                    pool_size: pool,
                    noise_features: noise,
                    overlap,
                    seed,
                    ..WorldGenParams::default()
                };
                let rep = generate_world(&p).unwrap();
                prop_assert!(validate_representation(&rep, &[]).is_valid());
                for (&(i, j), &lit) in rep.phi_table() {
                    for x in &rep.components()[i].pool {
                        prop_assert!(x.satisfies(lit).unwrap());
                    }
                    for x in &rep.components()[j].pool {
                        prop_assert!(!x.satisfies(lit).unwrap());
                    }
                }
                for (c, comp) in rep.components().iter().enumerate() {
                    for x in &comp.pool {
                        prop_assert_eq!(&rep.concept_label(x).unwrap(), rep.label(c));
                    }
                }
            }
        }
    }
}
