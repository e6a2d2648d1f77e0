use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::learners::{RefineOutcome, Rule, Step, Update};
use crate::model::Representation;
use crate::world::Transcript;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    /// A valid, uncorrupted rule is satisfied by its whole component.
    Coverage,
    /// Valid, uncorrupted rules come from distinct components.
    DistinctComponents,
    /// Only invalid or corrupted rules are deleted.
    DeletionNeedsException,
    /// Rules created so far are at most `m` plus the exceptions so far.
    CreationBound,
    /// A valid rule with counter `U` was updated by at least
    /// `(U - (m - 1)) / 2` exception rounds.
    UpdateCounter,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Invariant::Coverage => "coverage",
            Invariant::DistinctComponents => "distinct-components",
            Invariant::DeletionNeedsException => "deletion-needs-exception",
            Invariant::CreationBound => "creation-bound",
            Invariant::UpdateCounter => "update-counter",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub invariant: Invariant,
    pub round: usize,
    pub rule: Option<u64>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated at round {}", self.invariant, self.round)?;
        if let Some(r) = self.rule {
            write!(f, ", rule {r}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Clone, Debug, Default)]
struct RuleInfo {
    rep_round: usize,
    corrupted: bool,
    exception_updates: u32,
}

/// Per-round checks against the hidden truth. Feed it every step of a
/// session together with the learner's rules after the step.
#[derive(Clone, Debug)]
pub struct LemmaMonitor {
    enabled: BTreeSet<Invariant>,
    info: BTreeMap<u64, RuleInfo>,
    created: usize,
    exceptions: usize,
    pub violations: Vec<Violation>,
}

impl LemmaMonitor {
    pub fn new(enabled: impl IntoIterator<Item = Invariant>) -> Self {
        LemmaMonitor {
            enabled: enabled.into_iter().collect(),
            info: BTreeMap::new(),
            created: 0,
            exceptions: 0,
            violations: Vec::new(),
        }
    }

    /// Checks that hold for SR-DFF runs.
    pub fn for_srdff() -> Self {
        Self::new([
            Invariant::Coverage,
            Invariant::DistinctComponents,
            Invariant::DeletionNeedsException,
            Invariant::CreationBound,
        ])
    }

    /// Checks that hold for the unique-label learner.
    pub fn for_unique_label() -> Self {
        Self::new([
            Invariant::Coverage,
            Invariant::DistinctComponents,
            Invariant::UpdateCounter,
        ])
    }

    fn on(&self, inv: Invariant) -> bool {
        self.enabled.contains(&inv)
    }

    fn flag(&mut self, invariant: Invariant, round: usize, rule: Option<u64>, detail: String) {
        if self.on(invariant) {
            self.violations.push(Violation {
                invariant,
                round,
                rule,
                detail,
            });
        }
    }

    pub fn observe(
        &mut self,
        step: &Step,
        transcript: &Transcript,
        rules: &[Rule],
        world: &Representation,
    ) {
        let t = step.index;
        let exception = transcript.rounds[t].hidden.exception;
        self.exceptions += usize::from(exception);
        let valid =
            |info: &RuleInfo| !transcript.rounds[info.rep_round].hidden.exception;

        match &step.update {
            Update::Created { rule } => {
                self.info.insert(
                    *rule,
                    RuleInfo {
                        rep_round: t,
                        ..RuleInfo::default()
                    },
                );
                self.created += 1;
                if self.created > world.m() + self.exceptions {
                    let detail = format!(
                        "{} rules created with m = {} and {} exceptions",
                        self.created,
                        world.m(),
                        self.exceptions
                    );
                    self.flag(Invariant::CreationBound, t, Some(*rule), detail);
                }
            }
            Update::Refined {
                rule,
                outcome,
                deleted,
                ..
            } => {
                if let Some(info) = self.info.get_mut(rule) {
                    if exception {
                        info.exception_updates += 1;
                        if *outcome == RefineOutcome::Added {
                            info.corrupted = true;
                        }
                    }
                }
                if *deleted {
                    self.check_deletion(*rule, t, transcript);
                }
            }
            Update::Pruned { rule, deleted, .. } => {
                if let Some(info) = self.info.get_mut(rule) {
                    if exception {
                        info.exception_updates += 1;
                        info.corrupted = true;
                    }
                }
                if *deleted {
                    self.check_deletion(*rule, t, transcript);
                }
            }
            Update::Restarted => {
                self.info.clear();
            }
            _ => {}
        }

        let mut owners: BTreeMap<usize, u64> = BTreeMap::new();
        for rule in rules {
            let Some(info) = self.info.get(&rule.id).cloned() else {
                continue;
            };
            if !valid(&info) {
                continue;
            }
            let component = transcript.rounds[info.rep_round].hidden.component;
            if self.on(Invariant::UpdateCounter) {
                let excess = i64::from(rule.update_count) - (world.m() as i64 - 1);
                if excess > 2 * i64::from(info.exception_updates) {
                    let detail = format!(
                        "counter {} with only {} exception updates",
                        rule.update_count, info.exception_updates
                    );
                    self.flag(Invariant::UpdateCounter, t, Some(rule.id), detail);
                }
            }
            if info.corrupted {
                continue;
            }
            if self.on(Invariant::Coverage) {
                let uncovered = world.components()[component]
                    .pool
                    .iter()
                    .position(|x| rule.conjunction.satisfied_by(x) != Ok(true));
                if let Some(i) = uncovered {
                    let detail = format!(
                        "pool example {i} of component {component} fails {}",
                        rule.conjunction
                    );
                    self.flag(Invariant::Coverage, t, Some(rule.id), detail);
                }
            }
            if let Some(other) = owners.insert(component, rule.id) {
                let detail = format!("shares component {component} with rule {other}");
                self.flag(Invariant::DistinctComponents, t, Some(rule.id), detail);
            }
        }
    }

    fn check_deletion(&mut self, rule: u64, t: usize, transcript: &Transcript) {
        let Some(info) = self.info.remove(&rule) else {
            return;
        };
        let invalid = transcript.rounds[info.rep_round].hidden.exception;
        if !invalid && !info.corrupted {
            let detail = format!(
                "valid rule from round {} deleted without absorbing an exception",
                info.rep_round
            );
            self.flag(Invariant::DeletionNeedsException, t, Some(rule), detail);
        }
    }

    pub fn created(&self) -> usize {
        self.created
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}
