use num_rational::BigRational;
use num_traits::Zero;

use crate::model::{Conjunction, Representation};
use crate::world::{StochasticSource, WorldError};

use super::analysis::{analyze_distribution, from_usize, phi_beta, to_f64};
use super::dlist::{eval_error_exact, RestrictedDecisionList};

#[derive(Clone, Debug)]
pub struct ErrhbReport {
    pub witness: RestrictedDecisionList,
    pub error: BigRational,
    /// `P[Ex]`.
    pub epsilon: BigRational,
    /// `epsilon + sqrt(beta) m^2 / 2`, as a float for display.
    pub bound: f64,
    pub holds: bool,
}

/// One rule per component, in descending order of `P[G]`, each keeping the
/// discriminative features against differently-labeled components whose
/// mass clears `beta`.
pub fn witness(
    world: &Representation,
    source: &StochasticSource,
    beta: &BigRational,
) -> Result<RestrictedDecisionList, WorldError> {
    let analysis = analyze_distribution(world, source)?;
    let kept = phi_beta(&analysis, beta);
    let mut order: Vec<usize> = (0..world.m()).collect();
    order.sort_by(|&a, &b| source.clean_mass(b).cmp(&source.clean_mass(a)).then(a.cmp(&b)));
    let rules = order
        .iter()
        .map(|&g| {
            let conj: Conjunction = (0..world.m())
                .filter_map(|h| world.phi(g, h))
                .filter(|l| kept.contains(&world.positive(*l)))
                .collect();
            (conj, world.label(g).clone())
        })
        .collect();
    Ok(RestrictedDecisionList {
        rules,
        default: world.label(order[0]).clone(),
    })
}

/// Exact check of `err(h_beta) <= eps + sqrt(beta) m^2 / 2`.
pub fn verify_errhb(
    world: &Representation,
    source: &StochasticSource,
    beta: &BigRational,
) -> Result<ErrhbReport, WorldError> {
    let witness = witness(world, source, beta)?;
    let error = eval_error_exact(&witness, world, source)?;
    let epsilon = source.exception_rate();
    let m = world.m();
    // (err - eps)^2 <= beta m^4 / 4, without square roots
    let excess = &error - &epsilon;
    let m2 = from_usize(m * m);
    let holds = excess <= BigRational::zero()
        || &excess * &excess <= beta * &m2 * &m2 / from_usize(4);
    let bound = to_f64(&epsilon) + to_f64(beta).sqrt() * (m * m) as f64 / 2.0;
    Ok(ErrhbReport {
        witness,
        error,
        epsilon,
        bound,
        holds,
    })
}
