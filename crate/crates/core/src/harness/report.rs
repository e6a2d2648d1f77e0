use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// How a report's pass verdict is reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Every trial must stay within its bound.
    Hard,
    /// The mean slack over trials must stay within the margin.
    Expectation,
    /// A fraction of trials must meet the target.
    Fraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub mistakes: u64,
    pub bound: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    /// Allowance added to the bound for expectation checks, or the required
    /// passing fraction for fraction checks.
    pub margin: f64,
    pub bound: Option<f64>,
    pub violations: Vec<usize>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub learner: String,
    pub m: usize,
    pub k_or_eps: String,
    pub base_seed: u64,
    pub kind: BoundKind,
    pub trials: Vec<TrialResult>,
    pub summary: Summary,
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl BoundReport {
    /// Every trial with a bound must meet it.
    pub fn hard(
        learner: &str,
        m: usize,
        k_or_eps: String,
        base_seed: u64,
        trials: Vec<TrialResult>,
    ) -> Self {
        let violations: Vec<usize> = trials.iter().filter(|t| !t.pass).map(|t| t.trial).collect();
        let xs: Vec<f64> = trials.iter().map(|t| t.mistakes as f64).collect();
        let (mean, stderr) = mean_stderr(&xs);
        let bounds: Vec<f64> = trials.iter().filter_map(|t| t.bound).collect();
        let bound = (!bounds.is_empty()).then(|| bounds.iter().cloned().fold(f64::MIN, f64::max));
        BoundReport {
            learner: learner.into(),
            m,
            k_or_eps,
            base_seed,
            kind: BoundKind::Hard,
            summary: Summary {
                mean,
                stderr,
                margin: 0.0,
                bound,
                pass: violations.is_empty(),
                violations,
            },
            trials,
        }
    }

    /// Passes when the mean of `mistakes - bound` is at most `z` standard
    /// errors above zero.
    pub fn expectation(
        learner: &str,
        m: usize,
        k_or_eps: String,
        base_seed: u64,
        trials: Vec<TrialResult>,
        z: f64,
    ) -> Self {
        let slack: Vec<f64> = trials
            .iter()
            .map(|t| t.mistakes as f64 - t.bound.unwrap_or(f64::INFINITY))
            .collect();
        let (mean_slack, stderr) = mean_stderr(&slack);
        let xs: Vec<f64> = trials.iter().map(|t| t.mistakes as f64).collect();
        let (mean, _) = mean_stderr(&xs);
        let margin = z * stderr;
        BoundReport {
            learner: learner.into(),
            m,
            k_or_eps,
            base_seed,
            kind: BoundKind::Expectation,
            summary: Summary {
                mean,
                stderr,
                margin,
                bound: Some(mean - mean_slack),
                violations: Vec::new(),
                pass: mean_slack <= margin,
            },
            trials,
        }
    }

    /// Passes when at least `required` of the trials pass.
    pub fn fraction(
        learner: &str,
        m: usize,
        k_or_eps: String,
        base_seed: u64,
        trials: Vec<TrialResult>,
        required: f64,
    ) -> Self {
        let mut report = Self::hard(learner, m, k_or_eps, base_seed, trials);
        let passed = report.trials.iter().filter(|t| t.pass).count();
        report.kind = BoundKind::Fraction;
        report.summary.margin = required;
        report.summary.pass = passed as f64 >= required * report.trials.len() as f64;
        report
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.trials.is_empty() {
            return 1.0;
        }
        self.trials.iter().filter(|t| t.pass).count() as f64 / self.trials.len() as f64
    }

    pub fn to_records(&self) -> Vec<CsvRecord> {
        let fmt_bound = |b: Option<f64>| b.map(fmt_f64).unwrap_or_default();
        let mut rows: Vec<CsvRecord> = self
            .trials
            .iter()
            .map(|t| CsvRecord {
                learner: self.learner.clone(),
                m: self.m,
                k_or_eps: self.k_or_eps.clone(),
                trial: t.trial.to_string(),
                seed: t.seed,
                mistakes: t.mistakes.to_string(),
                bound: fmt_bound(t.bound),
                pass: t.pass,
            })
            .collect();
        rows.push(CsvRecord {
            learner: self.learner.clone(),
            m: self.m,
            k_or_eps: self.k_or_eps.clone(),
            trial: "summary".into(),
            seed: self.base_seed,
            mistakes: fmt_f64(self.summary.mean),
            bound: fmt_bound(self.summary.bound),
            pass: self.summary.pass,
        });
        rows
    }
}

fn fmt_f64(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// One CSV line: a trial or a per-configuration summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub learner: String,
    pub m: usize,
    pub k_or_eps: String,
    /// Trial index, or `summary`.
    pub trial: String,
    pub seed: u64,
    /// Mistake count, or the mean on summary rows.
    pub mistakes: String,
    pub bound: String,
    pub pass: bool,
}

pub fn write_results<W: Write>(reports: &[BoundReport], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for report in reports {
        for rec in report.to_records() {
            w.serialize(rec)?;
        }
    }
    if reports.is_empty() {
        w.write_record(["learner", "m", "k_or_eps", "trial", "seed", "mistakes", "bound", "pass"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_results(reports: &[BoundReport], path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    write_results(reports, std::io::BufWriter::new(file))
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<CsvRecord>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
