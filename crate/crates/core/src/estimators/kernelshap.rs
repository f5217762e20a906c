//! KernelSHAP as an efficiency-constrained least-squares solve on sampled
//! coalitions.
//!
//! The single-shot mode solves once on `m` coalitions. The restart mode keeps
//! drawing batches of `m`: the reported estimate is the solve on all samples
//! pooled so far, and the stopping rule uses the spread of the independent
//! per-batch solves, so that `sqrt(Var / n)` is the standard error of the
//! pooled estimate.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::config::{AttributionEstimate, EstimatorConfig};
use crate::error::{Result, ShapError};
use crate::games::CooperativeGame;
use crate::parallel::evaluate_batch;
use crate::sampling::{Batch, CoalitionSource, KernelSampler};
use crate::stats::Welford;

use super::report::{range_of, EstimatorKind, ExplanationReport, IterationTrace, TraceRecord};
use super::solver::{BatchMoments, ConstrainedRidge};

/// Diagonal jitter tried once when the unregularized system is singular.
pub const SINGULAR_JITTER: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KernelShap {
    config: EstimatorConfig,
    restarts: bool,
}

struct Solved {
    beta: Vec<f64>,
    jitter: bool,
}

fn solve_with_fallback(a: &DMatrix<f64>, b: &DVector<f64>, c: f64, batch: Option<&Batch>) -> Result<Solved> {
    let moments = BatchMoments {
        a: a.clone(),
        b: b.clone(),
        lambda: 0.0,
    };
    let attempt = |m: &BatchMoments| ConstrainedRidge::new(m).map(|s| s.solve(b, c).iter().copied().collect());
    match attempt(&moments) {
        Ok(beta) => Ok(Solved { beta, jitter: false }),
        Err(ShapError::Singular(_)) => match attempt(&moments.with_lambda(SINGULAR_JITTER)) {
            Ok(beta) => Ok(Solved { beta, jitter: true }),
            Err(ShapError::Singular(msg)) => {
                let diag = batch.map_or_else(String::new, |batch| {
                    let mut distinct: Vec<String> = batch.coalitions.iter().map(|z| z.to_bitstring()).collect();
                    distinct.sort();
                    distinct.dedup();
                    let d = a.nrows();
                    let never: Vec<usize> = (0..d).filter(|&i| a[(i, i)] == 0.0).collect();
                    format!(
                        "; batch of {} coalitions with {} distinct, features never sampled: {never:?}",
                        batch.len(),
                        distinct.len()
                    )
                });
                Err(ShapError::Singular(format!("{msg}{diag}")))
            }
            Err(other) => Err(other),
        },
        Err(other) => Err(other),
    }
}

impl KernelShap {
    pub fn new(config: EstimatorConfig) -> Self {
        KernelShap {
            config,
            restarts: false,
        }
    }

    /// Repeats with fresh batches until the stopping rule holds or `T` batches are used.
    pub fn with_restarts(mut self, restarts: bool) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn run<G: CooperativeGame + ?Sized>(&self, game: &mut G) -> Result<ExplanationReport> {
        let mut sampler = KernelSampler::new(game.num_features(), self.config.seed, self.config.paired_sampling)?;
        self.run_with_source(game, &mut sampler)
    }

    pub fn run_with_source<G, S>(&self, game: &mut G, source: &mut S) -> Result<ExplanationReport>
    where
        G: CooperativeGame + ?Sized,
        S: CoalitionSource + ?Sized,
    {
        let cfg = &self.config;
        cfg.validate()?;
        let d = game.num_features();
        if d < 2 {
            return Err(ShapError::InvalidInput(format!("need at least 2 features, got {d}")));
        }
        if source.num_features() != d {
            return Err(ShapError::DimensionMismatch {
                expected: d,
                actual: source.num_features(),
                context: "coalition source vs game",
            });
        }
        let start = Instant::now();
        let boundary = game.boundary();
        let c = boundary.c;
        let max_batches = if self.restarts { cfg.max_iter } else { 1 };

        let mut pooled_a = DMatrix::<f64>::zeros(d, d);
        let mut pooled_b = DVector::<f64>::zeros(d);
        let mut welford = Welford::new(d);
        let mut trace = IterationTrace {
            lambda: Some(0.0),
            ..IterationTrace::default()
        };
        let mut evals: u64 = 2;
        let mut jitter = false;
        let mut converged = false;
        let mut beta = vec![0.0; d];
        let mut iterations = 0;
        let mut last_sigma = None;

        for n in 1..=max_batches {
            iterations = n;
            game.refresh()?;
            let batch = source.next_batch(cfg.m)?;
            let values = evaluate_batch(game, &batch.coalitions, cfg.execution);
            evals += values.len() as u64;
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(ShapError::NonFinite(format!(
                    "game value {} for coalition {}",
                    values[i],
                    batch.coalitions[i].to_bitstring()
                )));
            }
            let moments = BatchMoments::from_batch(&batch, &values, boundary.v_empty, 0.0)?;
            // running average over equally sized batches
            let w = 1.0 / n as f64;
            pooled_a += (&moments.a - &pooled_a) * w;
            pooled_b += (&moments.b - &pooled_b) * w;

            let pooled = solve_with_fallback(&pooled_a, &pooled_b, c, Some(&batch))?;
            jitter |= pooled.jitter;
            beta = pooled.beta;

            let mut max_sigma = None;
            if self.restarts {
                let single = if n == 1 {
                    Solved {
                        beta: beta.clone(),
                        jitter: false,
                    }
                } else {
                    solve_with_fallback(&moments.a, &moments.b, c, Some(&batch))?
                };
                jitter |= single.jitter;
                welford.update(&single.beta)?;
                if welford.count() >= 3 {
                    let ms = welford
                        .standard_error()
                        .expect("count >= 3")
                        .into_iter()
                        .fold(0.0, f64::max);
                    max_sigma = Some(ms);
                    let range = range_of(&beta);
                    let scale = if range < 1e-12 { (c.abs() / d as f64).max(1e-12) } else { range };
                    converged = ms < cfg.epsilon * scale;
                }
            } else {
                converged = true;
            }
            last_sigma = max_sigma;
            trace.push(TraceRecord {
                n,
                beta: beta.clone(),
                delta: None,
                variance: welford.variance(),
                max_sigma,
                range: range_of(&beta),
                r: None,
                flagged: false,
                evals,
                millis: start.elapsed().as_secs_f64() * 1e3,
            });
            if converged {
                break;
            }
        }

        trace.mean_second_moment = Some(pooled_a.transpose().iter().copied().collect());
        Ok(ExplanationReport {
            estimator: EstimatorKind::KernelShap,
            range: range_of(&beta),
            estimate: AttributionEstimate {
                beta: beta.clone(),
                iteration: iterations,
                running_mean: welford.mean().to_vec(),
                running_m2: welford.m2().to_vec(),
                converged,
            },
            attributions: beta,
            boundary,
            iterations,
            evaluations: evals,
            converged,
            max_sigma: last_sigma,
            rejected_batches: 0,
            jitter_applied: jitter,
            millis: start.elapsed().as_secs_f64() * 1e3,
            trace,
        })
    }
}

/// Single-shot KernelSHAP on `config.m` sampled coalitions.
pub fn kernel_shap<G: CooperativeGame + ?Sized>(game: &mut G, config: &EstimatorConfig) -> Result<ExplanationReport> {
    KernelShap::new(config.clone()).run(game)
}
