use crate::learners::LearnerSpec;
use crate::model::Representation;
use crate::rng::derive;
use crate::stochastic::{three_stage_run, StageSummaries, ThreeStageParams};
use crate::world::{
    adversarial_stream, stochastic_stream, Scenario, StochasticSource,
    StreamEvent, StreamSpec, Transcript,
};

use super::monitor::LemmaMonitor;
use super::report::{BoundReport, TrialResult};
use super::search::hard_bound;
use super::suites::{certified_k, run_monitored, unique_label_bound, TrialViolation};
use super::HarnessError;

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub scenario: Scenario,
    pub world: Representation,
    pub trials: usize,
    pub seed: u64,
    /// Run the per-round invariant monitor where the learner has one.
    pub invariants: bool,
}

impl TrialConfig {
    pub fn new(scenario: Scenario, world: Representation) -> Self {
        TrialConfig {
            trials: scenario.trials.max(1),
            seed: scenario.seed,
            scenario,
            world,
            invariants: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: BoundReport,
    pub transcripts: Vec<Transcript>,
    /// Per-trial stage summaries for three-stage runs.
    pub stages: Vec<StageSummaries>,
    pub violations: Vec<TrialViolation>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.report.summary.pass && self.violations.is_empty()
    }
}

fn trial_stream(cfg: &TrialConfig, trial: usize) -> Result<(Vec<StreamEvent>, String), HarnessError> {
    let seed = derive(cfg.seed, trial as u64);
    match &cfg.scenario.stream {
        spec @ StreamSpec::Script { rounds, .. } => {
            let exceptions = spec.exception_spec().expect("scripts carry an exception spec");
            let k = exceptions.k().to_string();
            Ok((adversarial_stream(&cfg.world, rounds, &exceptions, seed)?, k))
        }
        StreamSpec::Stochastic {
            weights,
            epsilon,
            n,
            seed: stream_seed,
            corruption,
        } => {
            let source = StochasticSource::from_f64(weights, *epsilon, *corruption)?;
            let events = stochastic_stream(&cfg.world, &source, *n, derive(*stream_seed ^ cfg.seed, trial as u64))?;
            Ok((events, epsilon.to_string()))
        }
    }
}

/// Runs a scenario `trials` times with per-trial seeds derived from the
/// base seed, checking each run against its learner's guarantee.
pub fn run_trials(cfg: &TrialConfig) -> Result<RunOutcome, HarnessError> {
    if cfg.trials == 0 {
        return Err(HarnessError::Other("trial count must be at least 1".into()));
    }
    let m = cfg.world.m();
    let pipeline = cfg.scenario.three_stage()?;
    let spec = cfg
        .scenario
        .learner
        .clone()
        .unwrap_or(LearnerSpec::Srdff { m });
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut transcripts = Vec::with_capacity(cfg.trials);
    let mut stages = Vec::new();
    let mut violations = Vec::new();
    let mut k_or_eps = String::new();

    for trial in 0..cfg.trials {
        let seed = derive(cfg.seed, trial as u64);
        let (stream, label) = trial_stream(cfg, trial)?;
        k_or_eps = label;
        if let Some(p) = &pipeline {
            let eps = match &cfg.scenario.stream {
                StreamSpec::Stochastic { epsilon, .. } => *epsilon,
                StreamSpec::Script { .. } => 0.0,
            };
            let params = ThreeStageParams::from_pipeline(m, p, stream.len());
            let report = three_stage_run(&stream, &cfg.world, params)?;
            let target = eps + 2.0 * p.alpha;
            trials.push(TrialResult {
                trial,
                seed,
                mistakes: report.summary.mistakes,
                bound: Some(target * stream.len() as f64),
                pass: report.summary.rate <= target,
            });
            stages.push(report.summary);
            transcripts.push(report.transcript);
            continue;
        }

        let spec = spec.reseeded(derive(seed, 7));
        let mut learner = spec.build()?;
        let mut monitor = match (&spec, cfg.invariants) {
            (LearnerSpec::Srdff { m: lm }, true) if *lm >= m => Some(LemmaMonitor::for_srdff()),
            (LearnerSpec::UniqueLabel { .. }, true) => Some(LemmaMonitor::for_unique_label()),
            _ => None,
        };
        let tr = run_monitored(&mut learner, &stream, &cfg.world, monitor.as_mut())?;
        let planted = stream.iter().filter(|e| e.injected()).count();
        let k_cert = certified_k(planted, &tr, &cfg.world);
        let mistakes = tr.mistakes() as u64;
        let bound = match &spec {
            LearnerSpec::UniqueLabel { .. } => Some(unique_label_bound(m, k_cert)),
            other => hard_bound(other, m, k_cert),
        };
        let pass = match (&spec, bound) {
            (LearnerSpec::UniqueLabel { .. }, _) | (_, None) => true,
            (_, Some(b)) => mistakes as f64 <= b,
        };
        trials.push(TrialResult {
            trial,
            seed,
            mistakes,
            bound,
            pass,
        });
        if let Some(mon) = monitor {
            violations.extend(mon.violations.into_iter().map(|violation| TrialViolation {
                learner: spec.label().into(),
                m,
                k: k_cert,
                trial,
                seed,
                violation,
            }));
        }
        transcripts.push(tr);
    }

    let name = if pipeline.is_some() { "three_stage" } else { spec.label() };
    let report = match (&pipeline, &spec) {
        (Some(p), _) => BoundReport::fraction(name, m, k_or_eps, cfg.seed, trials, 1.0 - 3.0 * p.delta),
        (None, LearnerSpec::UniqueLabel { .. }) => {
            BoundReport::expectation(name, m, k_or_eps, cfg.seed, trials, 3.0)
        }
        (None, _) => BoundReport::hard(name, m, k_or_eps, cfg.seed, trials),
    };
    Ok(RunOutcome {
        report,
        transcripts,
        stages,
        violations,
    })
}
