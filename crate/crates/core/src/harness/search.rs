use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng as _;
use serde::Serialize;

use crate::learners::{run_session, ub, LearnerSpec};
use crate::model::Representation;
use crate::rng;
use crate::world::{adversarial_stream, CorruptionKind, ExceptionSpec, ScriptRound};

use super::suites::{certified_k, pfr_bound};
use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    pub len: usize,
    pub k: usize,
    /// Maximum number of scripts evaluated.
    pub budget: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scripted {
    pub components: Vec<usize>,
    pub exceptions: BTreeSet<usize>,
    pub mistakes: u64,
    pub k_cert: usize,
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Scripted,
    /// True when every script of this length was tried, so `best` is the
    /// true maximum. Heuristic searches never claim that.
    pub exhaustive: bool,
    pub evaluated: u64,
    /// Evaluated scripts on which the learner exceeded its bound.
    pub violations: Vec<Scripted>,
}

/// The guarantee a learner is checked against, where it has a hard one.
pub fn hard_bound(learner: &LearnerSpec, world_m: usize, k_cert: usize) -> Option<f64> {
    match learner {
        LearnerSpec::Srdff { m } => Some(ub(*m as u64, k_cert as u64) as f64),
        LearnerSpec::Dff18 => (k_cert == 0).then(|| ub(world_m as u64, 0) as f64),
        LearnerSpec::Pfrdff => Some(pfr_bound(world_m, k_cert)),
        LearnerSpec::UniqueLabel { .. } => None,
    }
}

struct Evaluator<'a> {
    world: &'a Representation,
    learner: &'a LearnerSpec,
    seed: u64,
    evaluated: u64,
    violations: Vec<Scripted>,
}

impl Evaluator<'_> {
    fn eval(&mut self, components: &[usize], exceptions: &BTreeSet<usize>) -> Result<Scripted, HarnessError> {
        let script: Vec<ScriptRound> = components.iter().map(|&c| ScriptRound::component(c)).collect();
        let spec = ExceptionSpec::at(exceptions.iter().copied(), CorruptionKind::Mixed);
        let stream = adversarial_stream(self.world, &script, &spec, self.seed)?;
        let mut learner = self.learner.build()?;
        let tr = run_session(&mut learner, &stream, self.world)?;
        self.evaluated += 1;
        let k_cert = certified_k(exceptions.len(), &tr, self.world);
        let mistakes = tr.mistakes() as u64;
        let bound = hard_bound(self.learner, self.world.m(), k_cert);
        let s = Scripted {
            components: components.to_vec(),
            exceptions: exceptions.clone(),
            mistakes,
            k_cert,
            bound,
        };
        if bound.is_some_and(|b| mistakes as f64 > b) {
            self.violations.push(s.clone());
        }
        Ok(s)
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn subsets(n: usize, k: usize) -> Vec<BTreeSet<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<BTreeSet<usize>>) {
        if cur.len() == k {
            out.push(cur.iter().copied().collect());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Looks for a script of `len` rounds with at most `k` planted exceptions
/// that maximizes the learner's mistakes. Exhaustive for short scripts
/// that fit the budget, otherwise random restarts with greedy single-round
/// changes.
pub fn adversarial_search(
    world: &Representation,
    learner: &LearnerSpec,
    cfg: &SearchConfig,
) -> Result<SearchResult, HarnessError> {
    let m = world.m();
    let len = cfg.len;
    let k = cfg.k.min(len);
    let mut ev = Evaluator {
        world,
        learner,
        seed: cfg.seed,
        evaluated: 0,
        violations: Vec::new(),
    };
    let space = (m as u128)
        .checked_pow(len as u32)
        .and_then(|s| s.checked_mul(binomial(len, k)));
    let exhaustive = len <= 8 && space.is_some_and(|s| s <= cfg.budget as u128);
    let mut best: Option<Scripted> = None;
    let keep = |s: Scripted, best: &mut Option<Scripted>| {
        if best.as_ref().is_none_or(|b| s.mistakes > b.mistakes) {
            *best = Some(s);
        }
    };

    if exhaustive {
        let exception_sets = subsets(len, k);
        let mut script = vec![0usize; len];
        loop {
            for exc in &exception_sets {
                let s = ev.eval(&script, exc)?;
                keep(s, &mut best);
            }
            // next script in base-m counting order
            let mut i = 0;
            while i < len {
                script[i] += 1;
                if script[i] < m {
                    break;
                }
                script[i] = 0;
                i += 1;
            }
            if i == len {
                break;
            }
        }
    } else {
        let mut rng = rng::seeded(cfg.seed ^ 0x5EA4C4);
        while ev.evaluated < cfg.budget {
            let mut script: Vec<usize> = (0..len).map(|_| rng.gen_range(0..m)).collect();
            let mut exc: BTreeSet<usize> = index::sample(&mut rng, len, k).into_iter().collect();
            let mut current = ev.eval(&script, &exc)?;
            keep(current.clone(), &mut best);
            loop {
                let mut improved = false;
                for t in 0..len {
                    for c in 0..m {
                        if c == script[t] || ev.evaluated >= cfg.budget {
                            continue;
                        }
                        let old = script[t];
                        script[t] = c;
                        let s = ev.eval(&script, &exc)?;
                        if s.mistakes > current.mistakes {
                            current = s;
                            keep(current.clone(), &mut best);
                            improved = true;
                        } else {
                            script[t] = old;
                        }
                    }
                }
                if k > 0 && k < len {
                    for &from in exc.clone().iter() {
                        if ev.evaluated >= cfg.budget {
                            break;
                        }
                        let to = rng.gen_range(0..len);
                        if exc.contains(&to) {
                            continue;
                        }
                        let mut moved = exc.clone();
                        moved.remove(&from);
                        moved.insert(to);
                        let s = ev.eval(&script, &moved)?;
                        if s.mistakes > current.mistakes {
                            exc = moved;
                            current = s;
                            keep(current.clone(), &mut best);
                            improved = true;
                        }
                    }
                }
                if !improved || ev.evaluated >= cfg.budget {
                    break;
                }
            }
            if len == 0 {
                break;
            }
        }
    }

    let best = match best {
        Some(b) => b,
        None => ev.eval(&[], &BTreeSet::new())?,
    };
    Ok(SearchResult {
        best,
        exhaustive,
        evaluated: ev.evaluated,
        violations: ev.violations,
    })
}
