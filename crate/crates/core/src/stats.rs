//! Streaming mean and variance of vector-valued samples (Welford), with the
//! Chan et al. pairwise merge for combining partial accumulators.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(d: usize) -> Self {
        Welford {
            count: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    /// `Δ = x - mean; mean += Δ/n; m2 += Δ (x - mean')`.
    pub fn update(&mut self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.dim() {
            return Err(ShapError::DimensionMismatch {
                expected: self.dim(),
                actual: sample.len(),
                context: "welford sample",
            });
        }
        if let Some(i) = sample.iter().position(|x| !x.is_finite()) {
            return Err(ShapError::NonFinite(format!(
                "sample component {i} is {}",
                sample[i]
            )));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(sample) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
        Ok(())
    }

    /// Sample variance `m2 / (n - 1)`; `None` until two samples are seen.
    pub fn variance(&self) -> Option<Vec<f64>> {
        if self.count < 2 {
            return None;
        }
        let denom = (self.count - 1) as f64;
        Some(self.m2.iter().map(|s| s / denom).collect())
    }

    /// Per-coordinate standard error `sqrt(var / n)`.
    pub fn standard_error(&self) -> Option<Vec<f64>> {
        let n = self.count as f64;
        self.variance()
            .map(|v| v.into_iter().map(|x| (x / n).sqrt()).collect())
    }

    /// Combines two accumulators as if all samples had been fed to one.
    pub fn merge(&self, other: &Welford) -> Result<Welford> {
        if other.dim() != self.dim() {
            return Err(ShapError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
                context: "welford merge",
            });
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let mut out = Welford::new(self.dim());
        out.count = self.count + other.count;
        for i in 0..self.dim() {
            let delta = other.mean[i] - self.mean[i];
            out.mean[i] = self.mean[i] + delta * nb / n;
            out.m2[i] = self.m2[i] + other.m2[i] + delta * delta * na * nb / n;
        }
        Ok(out)
    }
}
