use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng as _;
use serde::Serialize;

use crate::learners::{ub, Learner, PfrDff, Session, SrDff, UniqueLabel};
use crate::model::{FeatureId, Representation};
use crate::rng::{self, derive};
use crate::stochastic::{
    analyze_distribution, auto_b, capacity_bound, class_error, feature_discovery, phi_beta,
    three_stage_run, verify_errhb, ThreeStageParams,
};
use crate::world::{
    count_min_exceptions, generate_world, stochastic_stream, CorruptionKind, StochasticSource,
    StreamEvent, Transcript, WorldGenParams,
};

use super::monitor::{LemmaMonitor, Violation};
use super::report::{BoundReport, TrialResult};
use super::streams::{hard_setup, trial_stream, trial_world_params, unique_label_setup, StreamKind};
use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    pub ms: Vec<usize>,
    pub ks: Vec<usize>,
}

impl SuiteConfig {
    /// `m` in 1..=6, `k` in 0..=5, 1000 trials each.
    pub fn hard_default() -> Self {
        SuiteConfig {
            trials: 1000,
            seed: 0xDFF,
            ms: (1..=6).collect(),
            ks: (0..=5).collect(),
        }
    }

    /// `m` in 2..=5, `k` in 0..=4, 2000 trials each.
    pub fn expectation_default() -> Self {
        SuiteConfig {
            trials: 2000,
            seed: 0xDFF3,
            ms: (2..=5).collect(),
            ks: (0..=4).collect(),
        }
    }

    pub fn cell_seed(&self, m: usize, k: usize, trial: usize) -> u64 {
        derive(derive(self.seed, ((m as u64) << 16) | k as u64), trial as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            pass,
            detail,
        }
    }
}

/// A located invariant violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialViolation {
    pub learner: String,
    pub m: usize,
    pub k: usize,
    pub trial: usize,
    pub seed: u64,
    pub violation: Violation,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteOutcome {
    pub reports: Vec<BoundReport>,
    pub violations: Vec<TrialViolation>,
    pub checks: Vec<Check>,
}

impl SuiteOutcome {
    pub fn bounds_pass(&self) -> bool {
        self.reports.iter().all(|r| r.summary.pass)
    }

    pub fn passed(&self) -> bool {
        self.bounds_pass() && self.violations.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn extend(&mut self, other: SuiteOutcome) {
        self.reports.extend(other.reports);
        self.violations.extend(other.violations);
        self.checks.extend(other.checks);
    }
}

/// Runs `learner` over `stream`, feeding every step to `monitor`.
pub fn run_monitored<L: Learner + ?Sized>(
    learner: &mut L,
    stream: &[StreamEvent],
    world: &Representation,
    mut monitor: Option<&mut LemmaMonitor>,
) -> Result<Transcript, HarnessError> {
    let mut session = Session::new(world);
    for event in stream {
        let step = session.step(learner, event)?;
        if let Some(mon) = monitor.as_deref_mut() {
            mon.observe(&step, session.transcript(), learner.rules(), world);
        }
    }
    Ok(session.into_transcript())
}

/// The exception count a bound is charged with: the planted `k`, raised to
/// the rounds the transcript cannot explain when exceptions cascade.
pub fn certified_k(k: usize, transcript: &Transcript, world: &Representation) -> usize {
    k.max(count_min_exceptions(transcript, world))
}

/// The wrapper's guarantee: `32 UB log2^2(8 UB)`, with `UB` clamped to 1.
pub fn pfr_bound(m: usize, k: usize) -> f64 {
    let u = ub(m as u64, k as u64).max(1) as f64;
    32.0 * u * (8.0 * u).log2().powi(2)
}

/// `2m(m-1) + 6k`.
pub fn unique_label_bound(m: usize, k: usize) -> f64 {
    (2 * m * (m - 1) + 6 * k) as f64
}

/// SR-DFF against `UB(m, k)` with the per-round invariant monitor, plus the
/// zero-exception replay against DFF18.
pub fn theorem1(cfg: &SuiteConfig) -> Result<SuiteOutcome, HarnessError> {
    let mut out = SuiteOutcome::default();
    let mut equivalence_failures = Vec::new();
    let mut equivalence_runs = 0;
    let mut beyond_slack = Vec::new();
    for &m in &cfg.ms {
        for &k in &cfg.ks {
            let mut trials = Vec::with_capacity(cfg.trials);
            for trial in 0..cfg.trials {
                let seed = cfg.cell_seed(m, k, trial);
                let setup = hard_setup(m, k, trial, seed)?;
                let mut learner = SrDff::new(m)?;
                let mut monitor = LemmaMonitor::for_srdff();
                let tr = run_monitored(&mut learner, &setup.stream, &setup.world, Some(&mut monitor))?;
                let mistakes = tr.mistakes() as u64;
                let k_cert = certified_k(k, &tr, &setup.world);
                let bound = ub(m as u64, k_cert as u64);
                if mistakes > bound + k_cert as u64 {
                    beyond_slack.push(seed);
                }
                trials.push(TrialResult {
                    trial,
                    seed,
                    mistakes,
                    bound: Some(bound as f64),
                    pass: mistakes <= bound,
                });
                out.violations.extend(monitor.violations.into_iter().map(|violation| {
                    TrialViolation {
                        learner: "srdff".into(),
                        m,
                        k,
                        trial,
                        seed,
                        violation,
                    }
                }));
                if k == 0 {
                    equivalence_runs += 1;
                    let mut baseline = SrDff::dff18();
                    let other = run_monitored(&mut baseline, &setup.stream, &setup.world, None)?;
                    if other.to_jsonl() != tr.to_jsonl() {
                        equivalence_failures.push(seed);
                    }
                }
            }
            out.reports
                .push(BoundReport::hard("srdff", m, k.to_string(), cfg.seed, trials));
        }
    }
    out.checks.push(Check::new(
        "srdff-creation-slack",
        beyond_slack.is_empty(),
        format!(
            "{} runs above UB(m, k) + k, counting one mistake per created rule {:?}",
            beyond_slack.len(),
            beyond_slack
        ),
    ));
    out.checks.push(Check::new(
        "dff18-equivalence",
        equivalence_failures.is_empty(),
        format!(
            "{} of {equivalence_runs} exception-free replays differ (seeds {:?})",
            equivalence_failures.len(),
            equivalence_failures
        ),
    ));
    Ok(out)
}

/// DFF18 and SR-DFF on `trials` exception-free streams; the transcripts
/// must match byte for byte.
pub fn zero_exception_equivalence(trials: usize, seed: u64) -> Result<Check, HarnessError> {
    let mut differ = Vec::new();
    for trial in 0..trials {
        let m = 1 + trial % 6;
        let s = derive(seed, trial as u64);
        let setup = hard_setup(m, 0, trial, s)?;
        let a = run_monitored(&mut SrDff::new(m)?, &setup.stream, &setup.world, None)?;
        let b = run_monitored(&mut SrDff::dff18(), &setup.stream, &setup.world, None)?;
        if a.to_jsonl() != b.to_jsonl() {
            differ.push(trial);
        }
    }
    Ok(Check::new(
        "dff18-equivalence",
        differ.is_empty(),
        format!("{} of {trials} paired replays differ {:?}", differ.len(), differ),
    ))
}

/// The parameter-free wrapper on the hard-bound streams.
pub fn theorem2(cfg: &SuiteConfig) -> Result<SuiteOutcome, HarnessError> {
    let mut out = SuiteOutcome::default();
    let mut terminal_failures = Vec::new();
    let mut runs = 0usize;
    for &m in &cfg.ms {
        for &k in &cfg.ks {
            let mut trials = Vec::with_capacity(cfg.trials);
            for trial in 0..cfg.trials {
                let seed = cfg.cell_seed(m, k, trial);
                let setup = hard_setup(m, k, trial, seed)?;
                let mut learner = PfrDff::new();
                let tr = run_monitored(&mut learner, &setup.stream, &setup.world, None)?;
                let mistakes = tr.mistakes() as u64;
                let k_cert = certified_k(k, &tr, &setup.world);
                let bound = pfr_bound(m, k_cert);
                trials.push(TrialResult {
                    trial,
                    seed,
                    mistakes,
                    bound: Some(bound),
                    pass: mistakes as f64 <= bound,
                });
                runs += 1;
                let terminal = learner.terminal();
                if terminal.m >= 2 * m as u64 {
                    terminal_failures.push((m, k, trial, terminal.m, terminal.k, k_cert));
                }
            }
            out.reports
                .push(BoundReport::hard("pfrdff", m, k.to_string(), cfg.seed, trials));
        }
    }
    let shown: Vec<String> = terminal_failures
        .iter()
        .take(10)
        .map(|(m, k, t, mt, kt, kc)| format!("m={m} k={k} trial={t}: ended at ({mt},{kt}) with {kc} exceptions"))
        .collect();
    out.checks.push(Check::new(
        "pfrdff-terminal-phase",
        terminal_failures.is_empty(),
        format!(
            "{} of {runs} runs ended with m~ >= 2m{}{}",
            terminal_failures.len(),
            if shown.is_empty() { "" } else { "; e.g. " },
            shown.join("; ")
        ),
    ));
    Ok(out)
}

/// The unique-label learner against `2m(m-1) + 6k` in expectation, with
/// the update-counter invariant checked every round.
pub fn theorem3(cfg: &SuiteConfig) -> Result<SuiteOutcome, HarnessError> {
    let mut out = SuiteOutcome::default();
    for &m in &cfg.ms {
        for &k in &cfg.ks {
            let mut trials = Vec::with_capacity(cfg.trials);
            for trial in 0..cfg.trials {
                let seed = cfg.cell_seed(m, k, trial);
                let setup = unique_label_setup(m, k, trial, seed)?;
                let mut learner = UniqueLabel::for_components(m, derive(seed, 7))?;
                let mut monitor = LemmaMonitor::for_unique_label();
                let tr = run_monitored(&mut learner, &setup.stream, &setup.world, Some(&mut monitor))?;
                let mistakes = tr.mistakes() as u64;
                let k_cert = certified_k(k, &tr, &setup.world);
                let bound = unique_label_bound(m, k_cert);
                trials.push(TrialResult {
                    trial,
                    seed,
                    mistakes,
                    bound: Some(bound),
                    pass: true,
                });
                out.violations.extend(monitor.violations.into_iter().map(|violation| {
                    TrialViolation {
                        learner: "unique_label".into(),
                        m,
                        k,
                        trial,
                        seed,
                        violation,
                    }
                }));
            }
            out.reports.push(BoundReport::expectation(
                "unique_label",
                m,
                k.to_string(),
                cfg.seed,
                trials,
                3.0,
            ));
        }
    }
    Ok(out)
}

/// SR-DFF mistake counts on world pairs that differ only in how many noise
/// features they carry.
pub fn noise_independence(
    trials: usize,
    seed: u64,
    noise: (usize, usize),
) -> Result<Check, HarnessError> {
    let mut differ = Vec::new();
    for trial in 0..trials {
        let m = 1 + trial % 6;
        let k = trial % 4;
        let s = derive(seed, trial as u64);
        let base = trial_world_params(m, s, false);
        let w0 = generate_world(&WorldGenParams {
            noise_features: noise.0,
            ..base.clone()
        })?;
        let w1 = generate_world(&WorldGenParams {
            noise_features: noise.1,
            ..base
        })?;
        let kind = StreamKind::for_trial(trial);
        let len = super::streams::hard_len(m, k, s);
        let s0 = trial_stream(&w0, kind, len, k, s)?;
        let s1 = trial_stream(&w1, kind, len, k, s)?;
        let a = run_monitored(&mut SrDff::new(m)?, &s0, &w0, None)?;
        let b = run_monitored(&mut SrDff::new(m)?, &s1, &w1, None)?;
        if a.mistakes() != b.mistakes() {
            differ.push((trial, a.mistakes(), b.mistakes()));
        }
    }
    Ok(Check::new(
        "noise-independence",
        differ.is_empty(),
        format!(
            "{} of {trials} pairs ({} vs {} noise features) differ {:?}",
            differ.len(),
            noise.0,
            noise.1,
            differ
        ),
    ))
}

/// Every invariant check on its natural stream suite.
pub fn lemmas(hard: &SuiteConfig, expectation: &SuiteConfig) -> Result<SuiteOutcome, HarnessError> {
    let mut out = theorem1(hard)?;
    out.reports.clear();
    let t3 = theorem3(expectation)?;
    out.violations.extend(t3.violations);
    out.checks
        .push(noise_independence(200, hard.seed, (0, 50))?);
    Ok(out)
}

fn q(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Random world and source for the exact-analysis checks.
pub fn random_source(seed: u64) -> Result<(Representation, StochasticSource), HarnessError> {
    let mut rng = rng::seeded(seed);
    let m = rng.gen_range(1..=5);
    let world = generate_world(&WorldGenParams {
        m,
        label_count: rng.gen_range(1..=m),
        pool_size: rng.gen_range(1..=3),
        noise_features: rng.gen_range(0..=2),
        overlap: rng.gen_range(0..=1),
        seed: derive(seed, 1),
        ..WorldGenParams::default()
    })?;
    let counts: Vec<u64> = (0..m).map(|_| rng.gen_range(1..=10)).collect();
    let eps = [q(0, 1), q(1, 20), q(1, 10), q(1, 5)][rng.gen_range(0..4)].clone();
    let kind = [
        CorruptionKind::WrongLabel,
        CorruptionKind::WrongFeature,
        CorruptionKind::Both,
        CorruptionKind::Mixed,
    ][rng.gen_range(0..4)];
    let source = StochasticSource::from_counts(&counts, eps, kind)?;
    Ok((world, source))
}

/// Exact checks of the feature masses and of the witness list's error.
pub fn analysis_checks(sources: usize, triples: usize, seed: u64) -> Result<Vec<Check>, HarnessError> {
    let betas = [q(1, 100), q(1, 20), q(1, 10), q(1, 4), q(1, 2), q(1, 1)];
    let mut mass_fail = Vec::new();
    let mut size_fail = Vec::new();
    for i in 0..sources {
        let (world, source) = random_source(derive(seed, i as u64))?;
        let a = analyze_distribution(&world, &source)?;
        if a.total() > q(1, 2) {
            mass_fail.push(i);
        }
        for beta in &betas {
            let kept = phi_beta(&a, beta);
            // |Phi_beta| <= 1/(2 beta)  <=>  2 beta |Phi_beta| <= 1
            if BigRational::from_integer(BigInt::from(2 * kept.len())) * beta > BigRational::one() {
                size_fail.push(i);
            }
        }
    }
    let mut errhb_fail = Vec::new();
    for i in 0..triples {
        let s = derive(seed ^ 0xE44, i as u64);
        let (world, source) = random_source(s)?;
        let beta = betas[(s % betas.len() as u64) as usize].clone();
        let r = verify_errhb(&world, &source, &beta)?;
        if !r.holds {
            errhb_fail.push((i, r.error.to_f64().unwrap_or(f64::NAN), r.bound));
        }
    }
    Ok(vec![
        Check::new(
            "feature-mass-total",
            mass_fail.is_empty(),
            format!("{} of {sources} sources exceed 1/2 {:?}", mass_fail.len(), mass_fail),
        ),
        Check::new(
            "threshold-set-size",
            size_fail.is_empty(),
            format!("{} source/threshold pairs too large {:?}", size_fail.len(), size_fail),
        ),
        Check::new(
            "witness-error",
            errhb_fail.is_empty(),
            format!("{} of {triples} triples over the bound {:?}", errhb_fail.len(), errhb_fail),
        ),
    ])
}

/// The planted three-component source for the discovery check: label-distinct
/// components with weights 6:3:1, so the pair masses are 0.18, 0.06, 0.03.
pub fn discovery_source(seed: u64) -> Result<(Representation, StochasticSource), HarnessError> {
    let mut rng = rng::seeded(seed);
    let world = generate_world(&WorldGenParams {
        m: 3,
        label_count: 3,
        pool_size: rng.gen_range(2..=4),
        noise_features: rng.gen_range(0..=3),
        seed: derive(seed, 1),
        ..WorldGenParams::default()
    })?;
    let source = StochasticSource::from_counts(&[6, 3, 1], q(0, 1), CorruptionKind::Mixed)?;
    Ok((world, source))
}

/// Runs feature discovery on `seeds` planted sources and checks that every
/// feature above the threshold is found and the mistake allowance holds.
pub fn discovery_checks(
    seeds: usize,
    seed: u64,
    beta: f64,
    delta: f64,
) -> Result<Vec<Check>, HarnessError> {
    let b = auto_b(beta, delta);
    let beta_q = BigRational::from_float(beta).expect("finite");
    let mut found = 0usize;
    let mut frequent = 0usize;
    let mut over_budget = Vec::new();
    let mut under_sampled = 0usize;
    for i in 0..seeds {
        let s = derive(seed, i as u64);
        let (world, source) = discovery_source(s)?;
        let truth = phi_beta(&analyze_distribution(&world, &source)?, &beta_q);
        let stream = stochastic_stream(&world, &source, (10.0 * b).ceil() as usize, derive(s, 2))?;
        let out = feature_discovery(&stream, &world, b, beta)?;
        if truth.is_subset(&out.phi_hat) {
            found += 1;
        }
        if truth.iter().all(|l| out.counter.frequency(l) > beta) {
            frequent += 1;
        }
        if out.mistakes as f64 > b {
            over_budget.push(i);
        }
        under_sampled += usize::from(out.under_sampled);
    }
    let need = ((1.0 - delta) * seeds as f64).ceil() as usize;
    Ok(vec![
        Check::new(
            "discovery-finds-heavy-features",
            found >= need,
            format!("{found} of {seeds} seeds recover every heavy feature (need {need})"),
        ),
        Check::new(
            "discovery-frequency",
            frequent >= need,
            format!("{frequent} of {seeds} seeds see heavy features above the threshold (need {need}); {under_sampled} under-sampled"),
        ),
        Check::new(
            "discovery-mistake-allowance",
            over_budget.is_empty(),
            format!("{} of {seeds} seeds exceed b = {b:.1} {:?}", over_budget.len(), over_budget),
        ),
    ])
}

/// A tiny two-component source for the end-to-end runs.
pub fn tiny_source(seed: u64, eps: f64) -> Result<(Representation, StochasticSource), HarnessError> {
    let mut rng = rng::seeded(seed);
    let world = generate_world(&WorldGenParams {
        m: 2,
        label_count: 2,
        pool_size: rng.gen_range(2..=3),
        noise_features: rng.gen_range(0..=2),
        seed: derive(seed, 1),
        ..WorldGenParams::default()
    })?;
    let counts = [rng.gen_range(1..=4), rng.gen_range(1..=4)];
    let source = StochasticSource::from_counts(
        &counts,
        BigRational::from_float(eps).expect("finite"),
        CorruptionKind::Mixed,
    )?;
    Ok((world, source))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EndToEnd {
    pub alpha: f64,
    pub delta: f64,
    pub n: usize,
    pub seeds: usize,
    pub epsilons: Vec<f64>,
    pub seed: u64,
}

impl Default for EndToEnd {
    fn default() -> Self {
        EndToEnd {
            alpha: 0.25,
            delta: 0.1,
            n: 20_000,
            seeds: 200,
            epsilons: vec![0.0, 0.05],
            seed: 0x3570,
        }
    }
}

/// The three-stage learner on tiny sources: overall rate, exact stage-three
/// accuracy without exceptions, the class-size cap, and the restricted
/// class's best error.
pub fn three_stage_checks(cfg: &EndToEnd) -> Result<SuiteOutcome, HarnessError> {
    let mut out = SuiteOutcome::default();
    let mut capacity_fail = Vec::new();
    let mut influence_ok = 0usize;
    let mut influence_runs = 0usize;
    for (e, &eps) in cfg.epsilons.iter().enumerate() {
        let target = eps + 2.0 * cfg.alpha;
        let mut trials = Vec::with_capacity(cfg.seeds);
        let mut stage3_clean = 0usize;
        for i in 0..cfg.seeds {
            let s = derive(derive(cfg.seed, e as u64), i as u64);
            let (world, source) = tiny_source(s, eps)?;
            let params = ThreeStageParams::new(2, cfg.alpha, cfg.delta, cfg.n);
            let stream = stochastic_stream(&world, &source, cfg.n, derive(s, 2))?;
            let report = three_stage_run(&stream, &world, params.clone())?;
            let sm = &report.summary;
            trials.push(TrialResult {
                trial: i,
                seed: s,
                mistakes: sm.mistakes,
                bound: Some(target * cfg.n as f64),
                pass: sm.rate <= target,
            });
            if sm.stage3.rounds > 0 && sm.stage3.mistakes == 0 {
                stage3_clean += 1;
            }
            if sm.stage2.class_size_log2 > capacity_bound(2, params.beta) {
                capacity_fail.push((e, i));
            }
            let features: BTreeSet<FeatureId> = report.phi_hat.iter().map(|l| l.feature).collect();
            let best = class_error(&features, &world, &source, 2, params.erm.budget)?;
            influence_runs += 1;
            let slack = eps + params.beta.sqrt() * 4.0 / 2.0;
            if best.loss.to_f64().unwrap_or(f64::INFINITY) <= slack + 1e-12 {
                influence_ok += 1;
            }
        }
        if eps == 0.0 {
            let need = (0.9 * cfg.seeds as f64).ceil() as usize;
            out.checks.push(Check::new(
                "stage3-exact-without-exceptions",
                stage3_clean >= need,
                format!("{stage3_clean} of {} seeds make no stage-three mistake (need {need})", cfg.seeds),
            ));
        }
        out.reports.push(BoundReport::fraction(
            "three_stage",
            2,
            eps.to_string(),
            cfg.seed,
            trials,
            1.0 - 3.0 * cfg.delta,
        ));
    }
    out.checks.push(Check::new(
        "class-size-within-capacity",
        capacity_fail.is_empty(),
        format!("{} runs exceed the capacity bound {:?}", capacity_fail.len(), capacity_fail),
    ));
    let need = ((1.0 - cfg.delta) * influence_runs as f64).ceil() as usize;
    out.checks.push(Check::new(
        "restricted-class-error",
        influence_ok >= need,
        format!("{influence_ok} of {influence_runs} runs keep a list within eps + sqrt(beta) m^2/2 (need {need})"),
    ));
    Ok(out)
}

/// All stochastic checks at their default sizes.
pub fn stochastic(seed: u64) -> Result<SuiteOutcome, HarnessError> {
    let mut out = SuiteOutcome::default();
    out.checks.extend(analysis_checks(200, 100, seed)?);
    out.checks.extend(discovery_checks(500, seed, 0.1, 0.1)?);
    out.extend(three_stage_checks(&EndToEnd::default())?);
    Ok(out)
}
