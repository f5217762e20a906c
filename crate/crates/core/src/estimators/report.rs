use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{AttributionEstimate, GameBoundary};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Exact,
    KernelShap,
    Sim,
    StableSim,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Exact => "exact",
            EstimatorKind::KernelShap => "kernelshap",
            EstimatorKind::Sim => "sim",
            EstimatorKind::StableSim => "stable-sim",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(EstimatorKind::Exact),
            "kernelshap" => Ok(EstimatorKind::KernelShap),
            "sim" => Ok(EstimatorKind::Sim),
            "stable-sim" => Ok(EstimatorKind::StableSim),
            other => Err(format!("unknown estimator {other:?}")),
        }
    }
}

/// Snapshot of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub n: usize,
    pub beta: Vec<f64>,
    pub delta: Option<Vec<f64>>,
    pub variance: Option<Vec<f64>>,
    pub max_sigma: Option<f64>,
    pub range: f64,
    /// Relative variance increase tested by the negative-sampling guard.
    pub r: Option<f64>,
    pub flagged: bool,
    /// Cumulative game evaluations, boundary values included.
    pub evals: u64,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    /// Momentum and ridge coefficient of the run that produced the trace.
    pub momentum: Option<f64>,
    pub lambda: Option<f64>,
    /// Average of the per-iteration `A` matrices, row-major `d × d`.
    pub mean_second_moment: Option<Vec<f64>>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.n < record.n));
        self.records.push(record);
    }

    /// Writes `n, beta_0..beta_{d-1}, max_sigma, range, r, flagged, evals, millis`.
    pub fn write_csv<W: Write>(&self, d: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string()];
        header.extend((0..d).map(|i| format!("beta_{i}")));
        header.extend(["max_sigma", "range", "r", "flagged", "evals", "millis"].map(String::from));
        w.write_record(&header)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for rec in &self.records {
            let mut row = vec![rec.n.to_string()];
            row.extend(rec.beta.iter().map(|b| b.to_string()));
            row.push(opt(rec.max_sigma));
            row.push(rec.range.to_string());
            row.push(opt(rec.r));
            row.push(rec.flagged.to_string());
            row.push(rec.evals.to_string());
            row.push(format!("{:.3}", rec.millis));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Final attributions and diagnostics of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationReport {
    pub estimator: EstimatorKind,
    pub attributions: Vec<f64>,
    pub boundary: GameBoundary,
    pub iterations: usize,
    pub evaluations: u64,
    pub converged: bool,
    pub max_sigma: Option<f64>,
    pub range: f64,
    pub rejected_batches: usize,
    /// Set when a singular KernelSHAP system was solved with diagonal jitter.
    pub jitter_applied: bool,
    pub millis: f64,
    pub estimate: AttributionEstimate,
    #[serde(skip)]
    pub trace: IterationTrace,
}

impl ExplanationReport {
    /// `|Σβ - (v(1) - v(0))|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.attributions.iter().sum::<f64>() - self.boundary.c).abs()
    }
}

pub(crate) fn range_of(beta: &[f64]) -> f64 {
    let max = beta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = beta.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}
