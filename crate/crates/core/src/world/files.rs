//! JSON world files and scenario files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use super::{CorruptionKind, ExceptionSpec, Feedback, ScriptItem, ScriptRound, WorldError};
use crate::learners::LearnerSpec;
use crate::model::{Component, Example, Label, Literal, Representation};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiEntry {
    pub i: usize,
    pub j: usize,
    pub feature: u32,
    pub polarity: bool,
}

/// On-disk world: components as pools of assignment rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldFile {
    pub m: usize,
    pub labels: Vec<Label>,
    pub features: usize,
    pub components: Vec<Vec<Example>>,
    pub phi_table: Vec<PhiEntry>,
}

impl WorldFile {
    pub fn from_representation(rep: &Representation) -> Self {
        WorldFile {
            m: rep.m(),
            labels: rep.components().iter().map(|c| c.label.clone()).collect(),
            features: rep.universe(),
            components: rep
                .components()
                .iter()
                .map(|c| c.pool.iter().map(|x| (**x).clone()).collect())
                .collect(),
            phi_table: rep
                .phi_table()
                .iter()
                .map(|(&(i, j), l)| PhiEntry {
                    i,
                    j,
                    feature: l.feature.0,
                    polarity: l.polarity,
                })
                .collect(),
        }
    }

    pub fn into_representation(self) -> Result<Representation, WorldError> {
        if self.labels.len() != self.m || self.components.len() != self.m {
            return Err(WorldError::Params(format!(
                "m = {} but {} labels and {} components given",
                self.m,
                self.labels.len(),
                self.components.len()
            )));
        }
        // identical rows become one shared example, as in generated worlds
        let mut interned: BTreeMap<Vec<bool>, Arc<Example>> = BTreeMap::new();
        let components = self
            .labels
            .into_iter()
            .zip(self.components)
            .map(|(label, rows)| Component {
                label,
                pool: rows
                    .into_iter()
                    .map(|x| {
                        interned
                            .entry(x.to_bools())
                            .or_insert_with(|| Arc::new(x))
                            .clone()
                    })
                    .collect(),
            })
            .collect();
        let phi = self
            .phi_table
            .into_iter()
            .map(|e| ((e.i, e.j), Literal::new(e.feature, e.polarity)))
            .collect();
        Ok(Representation::new(self.features, components, phi)?)
    }
}

pub fn write_world<W: Write>(rep: &Representation, out: W) -> Result<(), WorldError> {
    serde_json::to_writer_pretty(out, &WorldFile::from_representation(rep))?;
    Ok(())
}

pub fn read_world<R: Read>(input: R) -> Result<Representation, WorldError> {
    let file: WorldFile = serde_json::from_reader(input)?;
    file.into_representation()
}

pub fn save_world(rep: &Representation, path: &Path) -> Result<(), WorldError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_world(rep, &mut out)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn load_world(path: &Path) -> Result<Representation, WorldError> {
    read_world(BufReader::new(File::open(path)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum WorldRef {
    Inline(WorldFile),
    Path(PathBuf),
}

impl WorldRef {
    pub fn resolve(&self, base: Option<&Path>) -> Result<Representation, WorldError> {
        match self {
            WorldRef::Inline(w) => w.clone().into_representation(),
            WorldRef::Path(p) => match base {
                Some(dir) if p.is_relative() => load_world(&dir.join(p)),
                _ => load_world(p),
            },
        }
    }
}

fn default_mixed() -> CorruptionKind {
    CorruptionKind::Mixed
}

fn default_both() -> CorruptionKind {
    CorruptionKind::Both
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamSpec {
    Script {
        #[serde(deserialize_with = "script_rounds")]
        rounds: Vec<ScriptRound>,
        #[serde(default)]
        exceptions: Vec<usize>,
        #[serde(default = "default_mixed")]
        corruption: CorruptionKind,
    },
    Stochastic {
        weights: Vec<f64>,
        #[serde(default)]
        epsilon: f64,
        n: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_both")]
        corruption: CorruptionKind,
    },
}

impl StreamSpec {
    pub fn exception_spec(&self) -> Option<ExceptionSpec> {
        match self {
            StreamSpec::Script {
                exceptions,
                corruption,
                ..
            } => Some(ExceptionSpec::at(exceptions.iter().copied(), *corruption)),
            StreamSpec::Stochastic { .. } => None,
        }
    }
}

fn script_round(v: &Value) -> Result<ScriptRound, String> {
    let item = |v: &Value| -> Result<ScriptItem, String> {
        match v {
            Value::Number(n) => n
                .as_u64()
                .map(|c| ScriptItem::Component(c as usize))
                .ok_or_else(|| format!("bad component index {n}")),
            Value::Array(_) => serde_json::from_value::<Example>(v.clone())
                .map(ScriptItem::Example)
                .map_err(|e| e.to_string()),
            other => Err(format!("expected a component index or a row, got {other}")),
        }
    };
    match v {
        Value::Object(map) => {
            let target = map
                .get("component")
                .or_else(|| map.get("example"))
                .ok_or("script round needs `component` or `example`")?;
            let feedback = match map.get("feedback") {
                None => None,
                Some(Value::Null) => Some(None),
                Some(fb) => Some(Some(
                    serde_json::from_value::<Feedback>(fb.clone()).map_err(|e| e.to_string())?,
                )),
            };
            Ok(ScriptRound {
                item: item(target)?,
                feedback,
            })
        }
        other => Ok(ScriptRound {
            item: item(other)?,
            feedback: None,
        }),
    }
}

fn script_rounds<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ScriptRound>, D::Error> {
    let values = Vec::<Value>::deserialize(d)?;
    values
        .iter()
        .map(|v| script_round(v).map_err(serde::de::Error::custom))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErmMode {
    #[default]
    Exhaustive,
    Greedy,
}

/// Settings for the three-stage stochastic pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticPipeline {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub delta: f64,
    /// `None` derives the mistake limit from `beta` and `delta`.
    pub b: Option<u64>,
    pub erm: ErmMode,
    pub budget: u64,
}

fn default_trials() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct Scenario {
    pub world: WorldRef,
    pub stream: StreamSpec,
    #[serde(default)]
    pub learner: Option<LearnerSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipeline: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub b: Option<Value>,
    #[serde(default)]
    pub erm: Option<ErmMode>,
    #[serde(default)]
    pub budget: Option<u64>,
}

impl Scenario {
    pub fn from_reader<R: Read>(input: R) -> Result<Self, WorldError> {
        Ok(serde_json::from_reader(input)?)
    }

    pub fn load(path: &Path) -> Result<(Self, Representation), WorldError> {
        let scenario = Self::from_reader(BufReader::new(File::open(path)?))?;
        let world = scenario.world.resolve(path.parent())?;
        Ok((scenario, world))
    }

    /// The three-stage settings, if this scenario asks for that pipeline.
    pub fn three_stage(&self) -> Result<Option<StochasticPipeline>, WorldError> {
        match self.pipeline.as_deref() {
            None => return Ok(None),
            Some("three_stage") => {}
            Some(other) => return Err(WorldError::Params(format!("unknown pipeline `{other}`"))),
        }
        let b = match &self.b {
            None => None,
            Some(Value::String(s)) if s == "auto" => None,
            Some(Value::Number(n)) => Some(
                n.as_u64()
                    .ok_or_else(|| WorldError::Params(format!("bad mistake limit {n}")))?,
            ),
            Some(other) => {
                return Err(WorldError::Params(format!(
                    "`b` must be \"auto\" or an integer, got {other}"
                )))
            }
        };
        Ok(Some(StochasticPipeline {
            alpha: self
                .alpha
                .ok_or_else(|| WorldError::Params("three_stage needs `alpha`".into()))?,
            beta: self.beta,
            delta: self.delta.unwrap_or(0.1),
            b,
            erm: self.erm.unwrap_or_default(),
            budget: self.budget.unwrap_or(10_000_000),
        }))
    }
}
