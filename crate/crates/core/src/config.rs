use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};

/// How the per-iteration game evaluations are scheduled.
///
/// Results are identical under both modes; `Parallel` degrades to sequential
/// execution when the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Hyperparameters shared by the iterative estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimatorConfig {
    /// EMA momentum.
    pub t: f64,
    /// Ridge coefficient on the update.
    pub lambda: f64,
    /// Coalitions per iteration.
    pub m: usize,
    /// Relative tolerance of the stopping rule.
    pub epsilon: f64,
    /// Relative variance-increase threshold for rejecting a batch.
    pub xi: f64,
    /// Reference mini-batch size for global games.
    pub batch_b: usize,
    /// Iteration cap.
    pub max_iter: usize,
    pub seed: u64,
    pub paired_sampling: bool,
    pub bias_correction: bool,
    pub negative_sampling_guard: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl EstimatorConfig {
    pub const DEFAULT_LAMBDA: f64 = 0.01;
    pub const DEFAULT_T_LOCAL: f64 = 0.5;
    pub const DEFAULT_T_GLOBAL: f64 = 0.55;
    pub const DEFAULT_EPSILON: f64 = 0.025;
    pub const DEFAULT_XI: f64 = 0.3;
    pub const DEFAULT_MAX_ITER: usize = 10_000;
    pub const DEFAULT_BATCH_B: usize = 512;

    /// Defaults for explaining a single instance over `d` features (`m = 10 d`).
    pub fn local(d: usize) -> Self {
        EstimatorConfig {
            t: Self::DEFAULT_T_LOCAL,
            lambda: Self::DEFAULT_LAMBDA,
            m: 10 * d.max(1),
            epsilon: Self::DEFAULT_EPSILON,
            xi: Self::DEFAULT_XI,
            batch_b: Self::DEFAULT_BATCH_B,
            max_iter: Self::DEFAULT_MAX_ITER,
            seed: 0,
            paired_sampling: false,
            bias_correction: false,
            negative_sampling_guard: false,
            execution: Execution::default(),
        }
    }

    /// Defaults for global explanations (larger momentum).
    pub fn global(d: usize) -> Self {
        EstimatorConfig {
            t: Self::DEFAULT_T_GLOBAL,
            ..Self::local(d)
        }
    }

    /// Turns on both stability mechanisms.
    pub fn stable(mut self) -> Self {
        self.bias_correction = true;
        self.negative_sampling_guard = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ShapError::InvalidInput(msg));
        if !(self.t > 0.0 && self.t < 1.0) {
            return bad(format!("momentum t must lie in (0, 1), got {}", self.t));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return bad(format!("xi must lie in (0, 1), got {}", self.xi));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.m == 0 {
            return bad("batch size m must be at least 1".into());
        }
        if self.max_iter == 0 {
            return bad("iteration cap T must be at least 1".into());
        }
        if self.batch_b == 0 {
            return bad("reference batch size B must be at least 1".into());
        }
        if self.paired_sampling && self.m % 2 != 0 {
            return bad(format!("paired sampling needs an even m, got {}", self.m));
        }
        Ok(())
    }
}

/// `v(0)`, `v(1)` and their difference `c`, which every estimate must sum to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GameBoundary {
    pub v_empty: f64,
    pub v_full: f64,
    pub c: f64,
}

impl GameBoundary {
    pub fn new(v_empty: f64, v_full: f64) -> Self {
        GameBoundary {
            v_empty,
            v_full,
            c: v_full - v_empty,
        }
    }
}

/// Current attribution vector plus the running moments of its trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributionEstimate {
    pub beta: Vec<f64>,
    pub iteration: usize,
    pub running_mean: Vec<f64>,
    pub running_m2: Vec<f64>,
    pub converged: bool,
}

impl AttributionEstimate {
    pub fn zeros(d: usize) -> Self {
        AttributionEstimate {
            beta: vec![0.0; d],
            iteration: 0,
            running_mean: vec![0.0; d],
            running_m2: vec![0.0; d],
            converged: false,
        }
    }
}
