//! Seeded trial batches, bound and invariant checks, adversarial search and
//! CSV export.

mod monitor;
mod report;
mod search;
mod streams;
mod suites;
mod trials;

use thiserror::Error;

use crate::learners::{LearnerError, SessionError};
use crate::stochastic::ErmError;
use crate::world::WorldError;

pub use monitor::{Invariant, LemmaMonitor, Violation};
pub use report::{
    export_results, mean_stderr, read_results, write_results, BoundKind, BoundReport, CsvRecord,
    Summary, TrialResult,
};
pub use search::{adversarial_search, hard_bound, Scripted, SearchConfig, SearchResult};
pub use streams::{
    expectation_len, hard_len, hard_setup, trial_stream, trial_world, trial_world_params,
    unique_label_setup, StreamKind, TrialSetup,
};
pub use suites::{
    analysis_checks, certified_k, discovery_checks, discovery_source, lemmas, noise_independence, pfr_bound,
    random_source, run_monitored, stochastic, theorem1, theorem2, theorem3, three_stage_checks,
    tiny_source, unique_label_bound, zero_exception_equivalence, Check, EndToEnd, SuiteConfig,
    SuiteOutcome, TrialViolation,
};
pub use trials::{run_trials, RunOutcome, TrialConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Erm(#[from] ErmError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}
