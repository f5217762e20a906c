//! Coalition sources for the regression-based estimators.
//!
//! [`KernelSampler`] draws i.i.d. coalitions from `p(z) ∝ μ_Sh(z)` restricted to
//! `0 < |z| < d`. Since the kernel depends on `z` only through `|z|`, a draw
//! picks the size from the normalized per-size mass and then a uniform subset
//! of that size (partial Fisher-Yates). The generator is ChaCha8 seeded from a
//! `u64`, whose stream is fixed across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalition::{self, size_kernel_mass, Coalition};
use crate::error::{Result, ShapError};

/// Pseudo-random generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One iteration's coalitions, optionally with non-uniform weights.
///
/// When `weights` is `None` every coalition carries weight `1/m`; otherwise the
/// weights are normalized by their sum when forming moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub coalitions: Vec<Coalition>,
    pub weights: Option<Vec<f64>>,
}

impl Batch {
    pub fn uniform(coalitions: Vec<Coalition>) -> Self {
        Batch {
            coalitions,
            weights: None,
        }
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    /// Normalized weights, one per coalition.
    pub fn normalized_weights(&self) -> Vec<f64> {
        match &self.weights {
            None => vec![1.0 / self.len() as f64; self.len()],
            Some(w) => {
                let total: f64 = w.iter().sum();
                w.iter().map(|x| x / total).collect()
            }
        }
    }
}

/// Anything that can hand the estimators a batch of coalitions per iteration.
pub trait CoalitionSource {
    fn num_features(&self) -> usize;

    fn next_batch(&mut self, m: usize) -> Result<Batch>;
}

/// Shapley-kernel coalition sampler.
#[derive(Debug, Clone)]
pub struct KernelSampler {
    d: usize,
    size_distribution: Vec<f64>,
    cumulative: Vec<f64>,
    rng: SimRng,
    paired: bool,
    scratch: Vec<usize>,
}

impl KernelSampler {
    pub fn new(d: usize, seed: u64, paired: bool) -> Result<Self> {
        if d < 2 {
            return Err(ShapError::InvalidInput(format!(
                "kernel sampling needs at least 2 features, got {d}"
            )));
        }
        let size_distribution = size_distribution(d);
        let mut cumulative = Vec::with_capacity(d - 1);
        let mut acc = 0.0;
        for p in &size_distribution {
            acc += p;
            cumulative.push(acc);
        }
        Ok(KernelSampler {
            d,
            size_distribution,
            cumulative,
            rng: rng_from_seed(seed),
            paired,
            scratch: (0..d).collect(),
        })
    }

    /// Probability of each subset size; entry `k - 1` is the mass of size `k`.
    pub fn size_distribution(&self) -> &[f64] {
        &self.size_distribution
    }

    pub fn is_paired(&self) -> bool {
        self.paired
    }

    fn draw_size(&mut self) -> usize {
        let u: f64 = self.rng.gen();
        let pos = self.cumulative.partition_point(|&c| c < u);
        pos.min(self.d - 2) + 1
    }

    /// One coalition: size from the kernel law, then a uniform subset of it.
    pub fn draw(&mut self) -> Coalition {
        let k = self.draw_size();
        for (i, slot) in self.scratch.iter_mut().enumerate() {
            *slot = i;
        }
        let mut bits = vec![false; self.d];
        for j in 0..k {
            let pick = self.rng.gen_range(j..self.d);
            self.scratch.swap(j, pick);
            bits[self.scratch[j]] = true;
        }
        Coalition::new(bits)
    }

    /// `m` draws; with pairing, every odd position is the complement of the
    /// draw before it.
    pub fn sample_batch(&mut self, m: usize) -> Result<Vec<Coalition>> {
        if m == 0 {
            return Err(ShapError::InvalidInput("batch size must be at least 1".into()));
        }
        if self.paired {
            if m % 2 != 0 {
                return Err(ShapError::InvalidInput(format!(
                    "paired sampling needs an even batch size, got {m}"
                )));
            }
            let mut out = Vec::with_capacity(m);
            for _ in 0..m / 2 {
                let z = self.draw();
                let zc = z.complement();
                out.push(z);
                out.push(zc);
            }
            Ok(out)
        } else {
            Ok((0..m).map(|_| self.draw()).collect())
        }
    }
}

impl CoalitionSource for KernelSampler {
    fn num_features(&self) -> usize {
        self.d
    }

    fn next_batch(&mut self, m: usize) -> Result<Batch> {
        Ok(Batch::uniform(self.sample_batch(m)?))
    }
}

/// Normalized per-size kernel mass over sizes `1..d`.
pub fn size_distribution(d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..d).map(|k| size_kernel_mass(d, k)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Every admissible coalition exactly once, weighted by its kernel probability.
///
/// Feeding this to an iterative estimator replaces the stochastic batches with
/// the population moments, which makes the iteration deterministic.
#[derive(Debug, Clone)]
pub struct FullEnumeration {
    batch: Batch,
    d: usize,
}

impl FullEnumeration {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(ShapError::InvalidInput(format!(
                "enumeration needs at least 2 features, got {d}"
            )));
        }
        let mut coalitions = Vec::new();
        let mut weights = Vec::new();
        for z in coalition::all_coalitions(d)? {
            let k = z.popcount();
            if k == 0 || k == d {
                continue;
            }
            weights.push(coalition::shapley_kernel_weight(d, k)?);
            coalitions.push(z);
        }
        Ok(FullEnumeration {
            batch: Batch {
                coalitions,
                weights: Some(weights),
            },
            d,
        })
    }

    pub fn batch(&self) -> &Batch {
        &self.batch
    }
}

impl CoalitionSource for FullEnumeration {
    fn num_features(&self) -> usize {
        self.d
    }

    fn next_batch(&mut self, _m: usize) -> Result<Batch> {
        Ok(self.batch.clone())
    }
}
