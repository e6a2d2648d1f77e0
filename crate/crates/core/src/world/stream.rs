use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use super::{
    Corruption, CorruptionKind, ExceptionPlan, Feedback, Hidden, StreamEvent, WorldError,
};
use crate::model::{Example, Label, Representation};
use crate::rng::{self, Rng};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScriptItem {
    /// Draw an example from this component's pool.
    Component(usize),
    Example(Example),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptRound {
    pub item: ScriptItem,
    /// Explicit teacher answer for this round. `Some(None)` silences the
    /// teacher. Overridden rounds are exceptions.
    pub feedback: Option<Option<Feedback>>,
}

impl ScriptRound {
    pub fn component(c: usize) -> Self {
        ScriptRound {
            item: ScriptItem::Component(c),
            feedback: None,
        }
    }

    pub fn example(x: Example) -> Self {
        ScriptRound {
            item: ScriptItem::Example(x),
            feedback: None,
        }
    }
}

/// Rounds whose feedback gets corrupted in an adversarial stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionSpec {
    pub rounds: BTreeSet<usize>,
    pub corruption: CorruptionKind,
}

impl ExceptionSpec {
    pub fn none() -> Self {
        ExceptionSpec {
            rounds: BTreeSet::new(),
            corruption: CorruptionKind::Mixed,
        }
    }

    pub fn at(rounds: impl IntoIterator<Item = usize>, corruption: CorruptionKind) -> Self {
        ExceptionSpec {
            rounds: rounds.into_iter().collect(),
            corruption,
        }
    }

    pub fn k(&self) -> usize {
        self.rounds.len()
    }
}

pub(crate) fn wrong_label_for(world: &Representation, component: usize, rng: &mut Rng) -> Label {
    let truth = world.label(component);
    let others: Vec<Label> = world.labels().into_iter().filter(|l| l != truth).collect();
    match others.choose(rng) {
        Some(l) => l.clone(),
        None => Label::new(&format!("~{truth}")),
    }
}

pub(crate) fn draw_corruption(
    world: &Representation,
    component: usize,
    kind: CorruptionKind,
    rng: &mut Rng,
) -> Corruption {
    let kind = match kind {
        CorruptionKind::Mixed => [
            CorruptionKind::WrongLabel,
            CorruptionKind::WrongFeature,
            CorruptionKind::Both,
        ][rng.gen_range(0..3)],
        k => k,
    };
    let wrong_label = wrong_label_for(world, component, rng);
    Corruption {
        kind,
        wrong_label,
        draw: rng.next_u64(),
    }
}

pub(crate) fn pick(world: &Representation, component: usize, rng: &mut Rng) -> Arc<Example> {
    let pool = &world.components()[component].pool;
    pool[rng.gen_range(0..pool.len())].clone()
}

/// Turns a script into events. Component entries draw a pool example,
/// explicit examples are attributed to the first component holding them.
pub fn adversarial_stream(
    world: &Representation,
    script: &[ScriptRound],
    exceptions: &ExceptionSpec,
    seed: u64,
) -> Result<Vec<StreamEvent>, WorldError> {
    if let Some(&index) = exceptions.rounds.iter().find(|&&i| i >= script.len()) {
        return Err(WorldError::ExceptionOutOfRange {
            index,
            len: script.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let mut events = Vec::with_capacity(script.len());
    for (t, round) in script.iter().enumerate() {
        let (component, example) = match &round.item {
            ScriptItem::Component(c) => {
                if *c >= world.m() {
                    return Err(WorldError::UnknownComponent {
                        round: t,
                        component: *c,
                        m: world.m(),
                    });
                }
                (*c, pick(world, *c, &mut rng))
            }
            ScriptItem::Example(x) => {
                let members = world.members(x);
                let c = *members.first().ok_or(WorldError::UncoveredExample(t))?;
                world.concept_label(x)?;
                (c, Arc::new(x.clone()))
            }
        };
        let exception = match &round.feedback {
            Some(fb) => Some(ExceptionPlan::Override(fb.clone())),
            None if exceptions.rounds.contains(&t) => Some(ExceptionPlan::Corrupt(
                draw_corruption(world, component, exceptions.corruption, &mut rng),
            )),
            None => None,
        };
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
