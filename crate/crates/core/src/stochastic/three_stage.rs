use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use crate::learners::{Learner, LearnerError, Move, Prediction, Rule, Session, SessionError, Update};
use crate::model::{Example, FeatureId, Label, Literal, Representation};
use crate::world::{ErmMode, Feedback, Instance, StochasticPipeline, StreamEvent, Transcript};

use super::analysis::{capacity_bound, log2_big};
use super::discovery::{auto_b, default_beta, FeatureDiscovery};
use super::dlist::RestrictedDecisionList;
use super::erm::{empirical_error, erm_decision_list, ErmConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct ThreeStageParams {
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub b: f64,
    /// Stream length; sets the stage-two sample size.
    pub n: usize,
    pub erm: ErmConfig,
}

impl ThreeStageParams {
    /// Default `beta` and `b` for the given targets.
    pub fn new(m: usize, alpha: f64, delta: f64, n: usize) -> Self {
        let beta = default_beta(alpha, m).min(0.5);
        ThreeStageParams {
            m,
            alpha,
            beta,
            delta,
            b: auto_b(beta, delta),
            n,
            erm: ErmConfig::default(),
        }
    }

    pub fn from_pipeline(m: usize, pipeline: &StochasticPipeline, n: usize) -> Self {
        let mut p = Self::new(m, pipeline.alpha, pipeline.delta, n);
        if let Some(beta) = pipeline.beta {
            p.beta = beta;
            p.b = auto_b(beta, pipeline.delta);
        }
        if let Some(b) = pipeline.b {
            p.b = b as f64;
        }
        p.erm = ErmConfig {
            mode: pipeline.erm,
            budget: pipeline.budget,
        };
        p
    }

    /// `ceil(alpha n / 2)`, capped at `n`.
    pub fn n1(&self) -> usize {
        ((self.alpha * self.n as f64 / 2.0).ceil() as usize).min(self.n)
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |what: String| Err(LearnerError::Params(what));
        if self.m < 1 {
            return bad("m must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1]", self.alpha));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Discover,
    Collect,
    Predict,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stage1Summary {
    pub mistakes: u64,
    pub rounds: usize,
    #[serde(rename = "F")]
    pub f: BTreeMap<String, u64>,
    pub phi_hat: Vec<String>,
    pub under_sampled: bool,
    pub b: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stage2Summary {
    pub n1: usize,
    pub rounds: usize,
    pub mistakes: u64,
    pub erm_error: f64,
    pub certified: bool,
    pub class_size_log2: f64,
    pub capacity_bound: f64,
    pub hypothesis: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stage3Summary {
    pub rounds: usize,
    pub mistakes: u64,
    pub rate: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StageSummaries {
    pub stage1: Stage1Summary,
    pub stage2: Stage2Summary,
    pub stage3: Stage3Summary,
    pub rounds: usize,
    pub mistakes: u64,
    pub rate: f64,
}

/// Feature discovery, then `n1` rounds of collecting labels while
/// predicting `y0`, then predictions by the empirical risk minimizer.
#[derive(Clone, Debug)]
pub struct ThreeStage {
    params: ThreeStageParams,
    stage: Stage,
    discovery: FeatureDiscovery,
    sample: Vec<(Arc<Example>, Label, usize)>,
    hypothesis: Option<RestrictedDecisionList>,
    explanations: BTreeMap<Label, usize>,
    summary: StageSummaries,
}

impl ThreeStage {
    pub fn new(world: &Representation, params: ThreeStageParams) -> Result<Self, LearnerError> {
        params.validate()?;
        let discovery = FeatureDiscovery::new(world.designation(), params.b, params.beta)?;
        let mut summary = StageSummaries::default();
        summary.stage1.b = params.b;
        summary.stage2.n1 = params.n1();
        summary.stage2.capacity_bound = capacity_bound(params.m, params.beta);
        Ok(ThreeStage {
            params,
            stage: Stage::Discover,
            discovery,
            sample: Vec::new(),
            hypothesis: None,
            explanations: BTreeMap::new(),
            summary,
        })
    }

    pub fn hypothesis(&self) -> Option<&RestrictedDecisionList> {
        self.hypothesis.as_ref()
    }

    pub fn phi_hat(&self) -> BTreeSet<Literal> {
        self.discovery.phi_hat()
    }

    pub fn summary(&self) -> StageSummaries {
        let mut s = self.summary.clone();
        let d = &self.discovery;
        s.stage1.mistakes = d.mistakes();
        s.stage1.rounds = d.rounds();
        s.stage1.f = d
            .counter()
            .counts
            .iter()
            .map(|(l, c)| (l.to_string(), *c))
            .collect();
        s.stage1.phi_hat = d.phi_hat().iter().map(|l| l.to_string()).collect();
        s.stage1.under_sampled = d.under_sampled();
        s.stage3.rate = if s.stage3.rounds == 0 {
            0.0
        } else {
            s.stage3.mistakes as f64 / s.stage3.rounds as f64
        };
        s.rounds = s.stage1.rounds + s.stage2.rounds + s.stage3.rounds;
        s.mistakes = s.stage1.mistakes + s.stage2.mistakes + s.stage3.mistakes;
        s.rate = if s.rounds == 0 {
            0.0
        } else {
            s.mistakes as f64 / s.rounds as f64
        };
        s
    }

    fn y0(&self) -> Result<(usize, Label), LearnerError> {
        self.discovery
            .anchor()
            .cloned()
            .ok_or(LearnerError::NotAnchored { t: 0 })
    }

    fn fit(&mut self) -> Result<(), LearnerError> {
        let (t0, y0) = self.y0()?;
        let features: BTreeSet<FeatureId> = self.phi_hat().iter().map(|l| l.feature).collect();
        let sample: Vec<(Arc<Example>, Label)> = self
            .sample
            .iter()
            .map(|(x, y, _)| (x.clone(), y.clone()))
            .collect();
        let result = erm_decision_list(
            &features,
            &sample,
            self.params.m,
            std::slice::from_ref(&y0),
            self.params.erm,
        )
        .map_err(|e| LearnerError::Other(e.to_string()))?;
        let s2 = &mut self.summary.stage2;
        s2.erm_error = empirical_error(&result, sample.len());
        s2.certified = result.certified && self.params.erm.mode == ErmMode::Exhaustive;
        s2.class_size_log2 = log2_big(&result.class_size);
        s2.hypothesis = result.hypothesis.to_string();

        let h = result.hypothesis;
        let mut observed = BTreeMap::new();
        let mut mapped = BTreeMap::new();
        for (x, y, t) in &self.sample {
            observed.insert(y.clone(), *t);
            mapped.insert(h.predict(x)?.clone(), *t);
        }
        let mut labels: BTreeSet<Label> = h.rules.iter().map(|(_, l)| l.clone()).collect();
        labels.insert(h.default.clone());
        self.explanations = labels
            .into_iter()
            .map(|l| {
                let t = observed.get(&l).or_else(|| mapped.get(&l)).copied().unwrap_or(t0);
                (l, t)
            })
            .collect();
        self.hypothesis = Some(h);
        Ok(())
    }
}

impl Learner for ThreeStage {
    fn name(&self) -> &'static str {
        "three_stage"
    }

    fn predict(&mut self, x: &Instance) -> Result<Move, LearnerError> {
        if self.stage == Stage::Discover && self.discovery.done() {
            self.stage = Stage::Collect;
        }
        if self.stage == Stage::Collect && self.sample.len() >= self.params.n1() {
            self.fit()?;
            self.stage = Stage::Predict;
        }
        match self.stage {
            Stage::Discover => self.discovery.predict(x),
            Stage::Collect => {
                let (t0, y0) = self.y0()?;
                Ok(Move::Predict(Prediction {
                    label: y0,
                    explanation: t0,
                }))
            }
            Stage::Predict => {
                let h = self.hypothesis.as_ref().expect("fitted before stage three");
                let label = h.predict(&x.example)?.clone();
                let explanation = self.explanations.get(&label).copied().unwrap_or(0);
                Ok(Move::Predict(Prediction { label, explanation }))
            }
        }
    }

    fn absorb(
        &mut self,
        x: &Instance,
        mv: &Move,
        feedback: Option<&Feedback>,
    ) -> Result<Update, LearnerError> {
        match self.stage {
            Stage::Discover => self.discovery.absorb(x, mv, feedback),
            Stage::Collect => {
                let y = match (feedback, mv.predicted()) {
                    (Some(fb), _) => fb.label.clone(),
                    (None, Some(p)) => p.clone(),
                    (None, None) => return Err(LearnerError::MissingLabel { t: x.t }),
                };
                self.summary.stage2.rounds += 1;
                self.summary.stage2.mistakes += u64::from(feedback.is_some());
                self.sample.push((x.example.clone(), y, x.t));
                Ok(Update::None)
            }
            Stage::Predict => {
                self.summary.stage3.rounds += 1;
                self.summary.stage3.mistakes += u64::from(feedback.is_some());
                Ok(Update::None)
            }
        }
    }

    fn rules(&self) -> &[Rule] {
        &[]
    }
}

#[derive(Clone, Debug)]
pub struct ThreeStageReport {
    pub summary: StageSummaries,
    pub phi_hat: BTreeSet<Literal>,
    pub hypothesis: Option<RestrictedDecisionList>,
    pub transcript: Transcript,
}

pub fn three_stage_run(
    stream: &[StreamEvent],
    world: &Representation,
    params: ThreeStageParams,
) -> Result<ThreeStageReport, SessionError> {
    let mut learner =
        ThreeStage::new(world, params).map_err(|source| SessionError::Learner { t: 0, source })?;
    let mut session = Session::new(world);
    for event in stream {
        session.step(&mut learner, event)?;
    }
    Ok(ThreeStageReport {
        summary: learner.summary(),
        phi_hat: learner.phi_hat(),
        hypothesis: learner.hypothesis,
        transcript: session.into_transcript(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, stochastic_stream, CorruptionKind, StochasticSource, WorldGenParams};
    use num_rational::BigRational;
    use num_traits::Zero;

    #[test]
    fn n1_rounds_up() {
        let p = ThreeStageParams::new(2, 0.25, 0.1, 20_001);
        assert_eq!(p.n1(), 2501);
        assert!((p.beta - 4.0 * 0.0625 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn realizable_world_is_learned_exactly() {
        let w = generate_world(&WorldGenParams {
            m: 2,
            pool_size: 3,
            noise_features: 1,
            seed: 3,
            ..WorldGenParams::default()
        })
        .unwrap();
        let src = StochasticSource::from_counts(&[1, 1], BigRational::zero(), CorruptionKind::Both)
            .unwrap();
        let mut params = ThreeStageParams::new(2, 0.25, 0.1, 3000);
        params.beta = 0.2;
        params.b = 60.0;
        let stream = stochastic_stream(&w, &src, 3000, 11).unwrap();
        let report = three_stage_run(&stream, &w, params).unwrap();
        let s = &report.summary;
        assert_eq!(s.rounds, 3000);
        assert!(s.stage1.mistakes as f64 <= 60.0);
        assert_eq!(s.stage2.rounds, 375);
        assert!(s.stage2.mistakes <= 375);
        assert!(s.stage2.certified);
        assert_eq!(s.stage2.erm_error, 0.0);
        assert_eq!(s.stage3.mistakes, 0);
        assert!(s.stage3.rounds > 2000);
        assert_eq!(report.transcript.mistakes() as u64, s.mistakes);
    }
}
