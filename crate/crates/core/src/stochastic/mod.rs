//! The i.i.d. setting: feature discovery, exact distribution analysis,
//! empirical risk minimization over restricted decision lists, and the
//! three-stage learner built from them.

mod analysis;
mod discovery;
mod dlist;
mod erm;
mod errhb;
mod three_stage;

pub use analysis::{
    analyze_distribution, capacity_bound, conjunction_count, enumeration_bound_log2,
    hypothesis_count, log2_big, phi_beta, DistributionAnalysis,
};
pub use discovery::{
    auto_b, concentration_count, default_beta, feature_discovery, DiscoveryOutcome,
    FeatureCounter, FeatureDiscovery,
};
pub use dlist::{eval_error_exact, eval_error_sample, irreducible_error, RestrictedDecisionList, Sample};
pub use erm::{class_error, empirical_error, erm_decision_list, ErmConfig, ErmError, ErmResult, DEFAULT_BUDGET};
pub use errhb::{verify_errhb, witness, ErrhbReport};
pub use three_stage::{
    three_stage_run, Stage1Summary, Stage2Summary, Stage3Summary, StageSummaries, ThreeStage,
    ThreeStageParams, ThreeStageReport,
};
