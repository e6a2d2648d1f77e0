use crate::model::{Example, Label, Literal, ModelError, Representation};

use super::transcript::{Round, Transcript};
use super::{Corruption, ExceptionPlan, Feedback, StreamEvent};

/// The explanation the learner pointed at, as the teacher sees it.
#[derive(Clone, Copy, Debug)]
pub struct Explained<'a> {
    pub example: &'a Example,
    pub component: usize,
}

fn pair_literals(world: &Representation) -> Vec<Literal> {
    world
        .pair_features()
        .into_iter()
        .flat_map(|f| [Literal::new(f.0, true), Literal::new(f.0, false)])
        .collect()
}

/// Lowest pair-feature literal true on all of `G_a` and false on all of
/// `G_b`. Pairs with equal labels have no table entry but may still be
/// separable this way.
pub fn separating_literal(world: &Representation, a: usize, b: usize) -> Option<Literal> {
    pair_literals(world)
        .into_iter()
        .find(|&l| separates(world, a, b, l))
}

fn separates(world: &Representation, a: usize, b: usize, l: Literal) -> bool {
    let (Ok(ga), Ok(gb)) = (world.component(a), world.component(b)) else {
        return false;
    };
    ga.pool.iter().all(|x| x.satisfies(l) == Ok(true))
        && gb.pool.iter().all(|x| x.satisfies(l) == Ok(false))
}

/// `phi[(a, b)]` when it exists, else a literal separating the two
/// components. When neither exists the round cannot be answered
/// consistently; the teacher then names the lowest pair-feature literal
/// that holds on `x_t` but not on `x_hat`, or failing that any literal
/// that holds on `x_t`.
pub fn true_feature(
    world: &Representation,
    a: usize,
    b: usize,
    x_t: &Example,
    x_hat: &Example,
) -> Literal {
    if let Some(l) = world.phi(a, b).or_else(|| separating_literal(world, a, b)) {
        return l;
    }
    let holds = |x: &Example, l: Literal| x.satisfies(l).unwrap_or(false);
    let lits = pair_literals(world);
    if let Some(&l) = lits.iter().find(|&&l| holds(x_t, l) && !holds(x_hat, l)) {
        return l;
    }
    if let Some(&l) = lits.iter().find(|&&l| holds(x_t, l)) {
        return l;
    }
    let v = x_t.value(crate::model::FeatureId(0)).unwrap_or(true);
    Literal::new(0, v)
}

/// A pair-feature literal that breaks the discriminative axiom for
/// `(a, b)`, picked by `draw`.
pub fn wrong_feature(
    world: &Representation,
    a: usize,
    b: usize,
    draw: u64,
    x_t: &Example,
) -> Literal {
    let ga = &world.components()[a].pool;
    let gb = &world.components()[b].pool;
    let candidates: Vec<Literal> = pair_literals(world)
        .into_iter()
        .filter(|&l| {
            let ok = ga.iter().all(|x| x.satisfies(l) == Ok(true))
                && gb.iter().all(|x| x.satisfies(l) == Ok(false));
            !ok
        })
        .collect();
    if candidates.is_empty() {
        let v = x_t.value(crate::model::FeatureId(0)).unwrap_or(true);
        return Literal::new(0, !v);
    }
    candidates[(draw % candidates.len() as u64) as usize]
}

/// Answer to a label query, used for the anchor round.
pub fn teacher_label(world: &Representation, event: &StreamEvent) -> Result<Label, ModelError> {
    let truth = world.component(event.hidden.component)?.label.clone();
    Ok(match &event.hidden.exception {
        None => truth,
        Some(ExceptionPlan::Corrupt(c)) if c.kind.corrupts_label() => c.wrong_label.clone(),
        Some(ExceptionPlan::Corrupt(_)) => truth,
        Some(ExceptionPlan::Override(fb)) => fb.as_ref().map(|f| f.label.clone()).unwrap_or(truth),
    })
}

/// Feedback for a prediction. `None` means the teacher accepts it.
pub fn teacher_respond(
    world: &Representation,
    event: &StreamEvent,
    predicted: &Label,
    explanation: Explained<'_>,
) -> Result<Option<Feedback>, ModelError> {
    let a = event.hidden.component;
    let b = explanation.component;
    let truth = world.component(a)?.label.clone();
    world.component(b)?;
    let x_t = &*event.example;
    let honest = || true_feature(world, a, b, x_t, explanation.example);

    let (label, literal) = match &event.hidden.exception {
        None => (truth, None),
        Some(ExceptionPlan::Override(fb)) => {
            return Ok(fb.clone().filter(|f| &f.label != predicted));
        }
        Some(ExceptionPlan::Corrupt(Corruption {
            kind,
            wrong_label,
            draw,
        })) => {
            let label = if kind.corrupts_label() {
                wrong_label.clone()
            } else {
                truth
            };
            let literal = kind
                .corrupts_feature()
                .then(|| wrong_feature(world, a, b, *draw, x_t));
            (label, literal)
        }
    };
    if &label == predicted {
        return Ok(None);
    }
    Ok(Some(Feedback {
        label,
        literal: Some(literal.unwrap_or_else(honest)),
    }))
}

/// Whether round `index` of `rounds` is what an exception-free teacher for
/// `world` would have produced.
pub fn round_consistent(world: &Representation, rounds: &[Round], index: usize) -> bool {
    let r = &rounds[index];
    let Ok(truth) = world.component(r.hidden.component).map(|c| &c.label) else {
        return false;
    };
    match (&r.predicted, &r.feedback) {
        (None, Some(fb)) => &fb.label == truth,
        (None, None) => false,
        (Some(p), None) => p == truth,
        (Some(p), Some(fb)) => {
            if p == truth || &fb.label != truth {
                return false;
            }
            let Some(b) = r.explanation_id.and_then(|e| rounds.get(e)) else {
                return false;
            };
            let (a, c) = (r.hidden.component, b.hidden.component);
            let by_table = match (world.phi(a, c), fb.literal) {
                (Some(l), got) => got == Some(l),
                (None, Some(got)) => separates(world, a, c, got),
                (None, None) => false,
            };
            // The representation prescribes no feature against an exception
            // example; the label alone decides.
            by_table || b.hidden.exception
        }
    }
}

/// Rounds inconsistent with `world`: a lower bound on the exceptions any
/// run of this transcript must be charged with for this representation.
pub fn count_min_exceptions(transcript: &Transcript, world: &Representation) -> usize {
    (0..transcript.rounds.len())
        .filter(|&i| !round_consistent(world, &transcript.rounds, i))
        .count()
}
