use std::collections::{BTreeMap, BTreeSet};
use std::ops::Add;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::model::{Conjunction, FeatureId, Label, Literal, ModelError, Representation};
use crate::world::{ErmMode, StochasticSource, WorldError};

use super::analysis::hypothesis_count;
use super::dlist::{draws, RestrictedDecisionList, Sample};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum ErmError {
    #[error("class has {count} hypotheses, over the budget of {budget}")]
    Budget { count: BigUint, budget: u64 },
    #[error("no labels to choose from")]
    NoLabels,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ErmConfig {
    pub mode: ErmMode,
    pub budget: u64,
}

impl Default for ErmConfig {
    fn default() -> Self {
        ErmConfig {
            mode: ErmMode::Exhaustive,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ErmResult<W> {
    pub hypothesis: RestrictedDecisionList,
    /// Weighted loss of `hypothesis`: a mistake count on samples, a
    /// probability on exact sources.
    pub loss: W,
    /// Whether `loss` is a certified minimum over the class.
    pub certified: bool,
    pub class_size: BigUint,
    pub visited: u64,
}

/// Examples collapsed to their values on the candidate features, with the
/// cost of answering each label.
struct Problem<W> {
    conjunctions: Vec<Conjunction>,
    /// `covers[c]` lists the groups satisfying conjunction `c`.
    covers: Vec<Vec<bool>>,
    /// `cost[g][l]`: loss from answering label `l` on group `g`.
    cost: Vec<Vec<W>>,
    labels: Vec<Label>,
    features: usize,
    m: usize,
}

fn conjunctions(features: &[FeatureId], max_len: usize) -> Vec<Conjunction> {
    let literals: Vec<Literal> = features
        .iter()
        .flat_map(|f| [Literal::new(f.0, false), Literal::new(f.0, true)])
        .collect();
    let mut out = vec![Conjunction::new()];
    let mut frontier: Vec<(Conjunction, usize)> = vec![(Conjunction::new(), 0)];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (conj, from) in &frontier {
            for (i, lit) in literals.iter().enumerate().skip(*from) {
                if conj.contains(&lit.negate()) {
                    continue;
                }
                let mut c = conj.clone();
                c.insert(*lit);
                next.push((c, i + 1));
            }
        }
        out.extend(next.iter().map(|(c, _)| c.clone()));
        frontier = next;
    }
    out
}

impl<W> Problem<W>
where
    W: Clone + Ord + Zero + for<'a> Add<&'a W, Output = W>,
{
    /// `rows` pairs a feature projection with per-label losses.
    fn new(
        features: &BTreeSet<FeatureId>,
        rows: Vec<(Vec<bool>, Vec<W>)>,
        labels: Vec<Label>,
        m: usize,
    ) -> Self {
        let features: Vec<FeatureId> = features.iter().copied().collect();
        let mut grouped: BTreeMap<Vec<bool>, Vec<W>> = BTreeMap::new();
        for (key, loss) in rows {
            let entry = grouped
                .entry(key)
                .or_insert_with(|| vec![W::zero(); labels.len()]);
            for (acc, w) in entry.iter_mut().zip(&loss) {
                *acc = acc.clone() + w;
            }
        }
        let keys: Vec<Vec<bool>> = grouped.keys().cloned().collect();
        let cost: Vec<Vec<W>> = grouped.into_values().collect();
        let conjunctions = conjunctions(&features, m.saturating_sub(1));
        let covers = conjunctions
            .iter()
            .map(|c| {
                keys.iter()
                    .map(|k| {
                        c.iter().all(|l| {
                            let pos = features.iter().position(|f| *f == l.feature);
                            pos.map(|p| k[p] == l.polarity).unwrap_or(false)
                        })
                    })
                    .collect()
            })
            .collect();
        Problem {
            conjunctions,
            covers,
            cost,
            labels,
            features: features.len(),
            m,
        }
    }

    fn label_cost(&self, groups: &[usize], label: usize) -> W {
        groups
            .iter()
            .fold(W::zero(), |acc, &g| acc + &self.cost[g][label])
    }

    fn split(&self, remaining: &[usize], c: usize) -> (Vec<usize>, Vec<usize>) {
        remaining.iter().partition(|&&g| self.covers[c][g])
    }

    fn to_list(&self, rules: &[(usize, usize)], default: usize) -> RestrictedDecisionList {
        RestrictedDecisionList {
            rules: rules
                .iter()
                .map(|&(c, l)| (self.conjunctions[c].clone(), self.labels[l].clone()))
                .collect(),
            default: self.labels[default].clone(),
        }
    }
}

struct Search<'p, W> {
    problem: &'p Problem<W>,
    default: usize,
    best: Option<(W, Vec<(usize, usize)>)>,
    stack: Vec<(usize, usize)>,
    visited: u64,
}

impl<W> Search<'_, W>
where
    W: Clone + Ord + Zero + for<'a> Add<&'a W, Output = W>,
{
    fn improves(&self, loss: &W) -> bool {
        self.best.as_ref().is_none_or(|(b, _)| loss < b)
    }

    fn run(&mut self, remaining: &[usize], spent: W) {
        self.visited += 1;
        let total = spent.clone() + &self.problem.label_cost(remaining, self.default);
        if self.improves(&total) {
            self.best = Some((total, self.stack.clone()));
        }
        if self.stack.len() == self.problem.m || remaining.is_empty() {
            return;
        }
        for c in 0..self.problem.conjunctions.len() {
            let conj = &self.problem.conjunctions[c];
            if self
                .stack
                .iter()
                .any(|&(p, _)| self.problem.conjunctions[p].is_subset(conj))
            {
                continue;
            }
            let (hit, rest) = self.problem.split(remaining, c);
            if hit.is_empty() {
                continue;
            }
            for l in 0..self.problem.labels.len() {
                let cost = spent.clone() + &self.problem.label_cost(&hit, l);
                if !self.improves(&cost) {
                    continue;
                }
                self.stack.push((c, l));
                self.run(&rest, cost);
                self.stack.pop();
            }
        }
    }
}

fn solve<W>(problem: &Problem<W>, config: ErmConfig) -> Result<ErmResult<W>, ErmError>
where
    W: Clone + Ord + Zero + for<'a> Add<&'a W, Output = W>,
{
    if problem.labels.is_empty() {
        return Err(ErmError::NoLabels);
    }
    let class_size = hypothesis_count(problem.m, problem.features, problem.labels.len());
    let all: Vec<usize> = (0..problem.cost.len()).collect();
    match config.mode {
        ErmMode::Exhaustive => {
            if class_size > BigUint::from(config.budget) {
                return Err(ErmError::Budget {
                    count: class_size,
                    budget: config.budget,
                });
            }
            let mut best: Option<(W, Vec<(usize, usize)>, usize)> = None;
            let mut visited = 0;
            for default in 0..problem.labels.len() {
                let mut search = Search {
                    problem,
                    default,
                    best: best.as_ref().map(|(w, r, _)| (w.clone(), r.clone())),
                    stack: Vec::new(),
                    visited: 0,
                };
                search.run(&all, W::zero());
                visited += search.visited;
                if let Some((w, rules)) = search.best {
                    if best.as_ref().is_none_or(|(b, _, _)| w < *b) {
                        best = Some((w, rules, default));
                    }
                }
            }
            let (loss, rules, default) = best.expect("the empty list is always evaluated");
            Ok(ErmResult {
                hypothesis: problem.to_list(&rules, default),
                loss,
                certified: true,
                class_size,
                visited,
            })
        }
        ErmMode::Greedy => {
            let (mut best_default, mut best_loss) = (0, problem.label_cost(&all, 0));
            for l in 1..problem.labels.len() {
                let loss = problem.label_cost(&all, l);
                if loss < best_loss {
                    (best_default, best_loss) = (l, loss);
                }
            }
            let default = best_default;
            let mut rules: Vec<(usize, usize)> = Vec::new();
            let mut remaining = all;
            let mut spent = W::zero();
            let mut visited = 1u64;
            while rules.len() < problem.m && !remaining.is_empty() {
                let current = spent.clone() + &problem.label_cost(&remaining, default);
                let mut pick: Option<(W, usize, usize)> = None;
                for c in 0..problem.conjunctions.len() {
                    let (hit, rest) = problem.split(&remaining, c);
                    if hit.is_empty() {
                        continue;
                    }
                    let tail = problem.label_cost(&rest, default);
                    for l in 0..problem.labels.len() {
                        visited += 1;
                        let loss = spent.clone() + &problem.label_cost(&hit, l) + &tail;
                        if pick.as_ref().is_none_or(|(b, _, _)| loss < *b) {
                            pick = Some((loss, c, l));
                        }
                    }
                }
                match pick {
                    Some((loss, c, l)) if loss < current => {
                        let (hit, rest) = problem.split(&remaining, c);
                        spent = spent + &problem.label_cost(&hit, l);
                        rules.push((c, l));
                        remaining = rest;
                    }
                    _ => break,
                }
            }
            let loss = spent + &problem.label_cost(&remaining, default);
            Ok(ErmResult {
                hypothesis: problem.to_list(&rules, default),
                loss,
                certified: false,
                class_size,
                visited,
            })
        }
    }
}

fn project(x: &crate::model::Example, features: &BTreeSet<FeatureId>) -> Result<Vec<bool>, ModelError> {
    features.iter().map(|&f| x.value(f)).collect()
}

/// Empirical risk minimizer over decision lists of at most `m` rules, each
/// a conjunction of at most `m - 1` literals over `features`. Labels are
/// those in the sample plus `extra_labels`.
pub fn erm_decision_list(
    features: &BTreeSet<FeatureId>,
    sample: &Sample,
    m: usize,
    extra_labels: &[Label],
    config: ErmConfig,
) -> Result<ErmResult<u64>, ErmError> {
    let labels: Vec<Label> = sample
        .iter()
        .map(|(_, y)| y.clone())
        .chain(extra_labels.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = sample
        .iter()
        .map(|(x, y)| {
            let key = project(x, features)?;
            let loss = labels.iter().map(|l| u64::from(l != y)).collect();
            Ok((key, loss))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    solve(&Problem::new(features, rows, labels, m), config)
}

/// The smallest exact error any list in the class reaches on the source.
/// Labels range over every label the source can emit.
pub fn class_error(
    features: &BTreeSet<FeatureId>,
    world: &Representation,
    source: &StochasticSource,
    m: usize,
    budget: u64,
) -> Result<ErmResult<BigRational>, ErmError> {
    source.check_world(world)?;
    let draws = draws(world, source);
    let labels: Vec<Label> = draws
        .iter()
        .flat_map(|(_, _, law)| law.iter().map(|(l, _)| l.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = draws
        .into_iter()
        .map(|(x, mass, law)| {
            let key = project(&x, features)?;
            let loss = labels
                .iter()
                .map(|l| {
                    let hit: BigRational = law
                        .iter()
                        .filter(|(y, _)| y == l)
                        .map(|(_, p)| p.clone())
                        .sum();
                    &mass - &mass * hit
                })
                .collect();
            Ok((key, loss))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    solve(
        &Problem::new(features, rows, labels, m),
        ErmConfig {
            mode: ErmMode::Exhaustive,
            budget,
        },
    )
}

/// Loss as a fraction of the sample size.
pub fn empirical_error(result: &ErmResult<u64>, sample_size: usize) -> f64 {
    if sample_size == 0 {
        return 0.0;
    }
    result.loss.to_f64().unwrap_or(f64::NAN) / sample_size as f64
}
