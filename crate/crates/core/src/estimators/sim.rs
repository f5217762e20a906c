//! Stochastic iteration with momentum.
//!
//! Each iteration draws a batch of coalitions, forms the batch moments and
//! solves the ridge-regularized, efficiency-constrained update in closed form:
//!
//! ```text
//! δ⁽ⁿ⁾ = Ā⁻¹ [ (b̄ - c₁Aβ⁽ⁿ⁻¹⁾) + 1 (c - c₁1ᵀβ⁽ⁿ⁻¹⁾ - 1ᵀĀ⁻¹(b̄ - c₁Aβ⁽ⁿ⁻¹⁾)) / 1ᵀĀ⁻¹1 ] / c₂
//! β⁽ⁿ⁾ = c₁ β⁽ⁿ⁻¹⁾ + c₂ δ⁽ⁿ⁾
//! ```
//!
//! with `c₁ = t, c₂ = 1 - t` for the plain EMA and `c₁ = t / (1 - tⁿ)`,
//! `c₂ = (1 - t) / (1 - tⁿ)` under initialization-bias correction. Every
//! iterate satisfies `1ᵀβ = v(1) - v(0)`.
//!
//! The trajectory's running variance (Welford) drives the stopping rule
//! `max_i sqrt(Var_i / n) < ε (max β - min β)`, checked from the third iterate
//! on. With the negative-sampling guard enabled, a candidate iterate that
//! raises the norm of the running variance of all candidates drawn so far by
//! more than a relative `ξ` is rejected and the previous `β`, `δ` are kept.

use std::time::Instant;

use nalgebra::DVector;

use crate::config::{AttributionEstimate, EstimatorConfig};
use crate::error::{Result, ShapError};
use crate::games::CooperativeGame;
use crate::parallel::evaluate_batch;
use crate::sampling::{CoalitionSource, KernelSampler};
use crate::stats::Welford;

use super::report::{range_of, EstimatorKind, ExplanationReport, IterationTrace, TraceRecord};
use super::solver::{BatchMoments, ConstrainedRidge};

/// Floor applied to the β range in the stopping rule when all attributions coincide.
const DEGENERATE_RANGE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SimShapley {
    config: EstimatorConfig,
}

impl SimShapley {
    pub fn new(config: EstimatorConfig) -> Self {
        SimShapley { config }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    fn kind(&self) -> EstimatorKind {
        if self.config.bias_correction || self.config.negative_sampling_guard {
            EstimatorKind::StableSim
        } else {
            EstimatorKind::Sim
        }
    }

    /// Runs with coalitions drawn from the Shapley-kernel sampler seeded by the config.
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
        if !(cfg.lambda > 0.0) {
            return Err(ShapError::InvalidInput(format!(
                "SIM-Shapley needs lambda > 0 for an invertible update, got {}",
                cfg.lambda
            )));
        }
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
        let t = cfg.t;

        let mut beta = DVector::<f64>::zeros(d);
        let mut welford = Welford::new(d);
        let mut candidate_stats = Welford::new(d);
        let mut trace = IterationTrace {
            momentum: Some(t),
            lambda: Some(cfg.lambda),
            ..IterationTrace::default()
        };
        let mut a_sum = vec![0.0; d * d];
        let mut evals: u64 = 2;
        let mut rejected = 0usize;
        let mut converged = false;
        let mut iterations = 0usize;
        let mut last_sigma = None;
        let mut delta_prev: Option<Vec<f64>> = None;

        for n in 1..=cfg.max_iter {
            iterations = n;
            game.refresh()?;
            let batch = source.next_batch(cfg.m)?;
            let values = evaluate_batch(game, &batch.coalitions, cfg.execution);
            evals += values.len() as u64;
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(ShapError::NonFinite(format!(
                    "game value {} for coalition {} at iteration {n}",
                    values[i],
                    batch.coalitions[i].to_bitstring()
                )));
            }
            let moments = BatchMoments::from_batch(&batch, &values, boundary.v_empty, cfg.lambda)?;
            for (acc, x) in a_sum.iter_mut().zip(moments.a.transpose().iter()) {
                *acc += x;
            }
            let solver = ConstrainedRidge::new(&moments)?;

            let (c1, c2) = if cfg.bias_correction {
                let denom = 1.0 - t.powi(n as i32);
                (t / denom, (1.0 - t) / denom)
            } else {
                (t, 1.0 - t)
            };
            let q = &moments.b - (&moments.a * &beta) * c1;
            let level = c - c1 * beta.sum();
            let delta = solver.solve(&q, level) / c2;
            let candidate = &beta * c1 + &delta * c2;
            if candidate.iter().any(|x| !x.is_finite()) {
                return Err(ShapError::NonFinite(format!(
                    "attribution update diverged at iteration {n}"
                )));
            }
            let candidate: Vec<f64> = candidate.iter().copied().collect();

            let mut r = None;
            let mut flagged = false;
            if cfg.negative_sampling_guard {
                // rejected candidates enter the reference too, so an unluckily
                // tight start cannot lock the guard shut
                let before = candidate_stats.variance();
                candidate_stats.update(&candidate)?;
                if let (Some(prev), Some(next)) = (before, candidate_stats.variance()) {
                    let prev_norm = l2(&prev);
                    if prev_norm > 0.0 {
                        let ratio = (l2(&next) - prev_norm) / prev_norm;
                        flagged = ratio > cfg.xi;
                        r = Some(ratio);
                    }
                }
            }
            if flagged {
                rejected += 1;
            } else {
                beta = DVector::from_column_slice(&candidate);
                welford.update(&candidate)?;
                delta_prev = Some(delta.iter().copied().collect());
            }

            let beta_vec: Vec<f64> = beta.iter().copied().collect();
            let range = range_of(&beta_vec);
            let mut max_sigma = None;
            if welford.count() >= 3 {
                let sigma = welford.standard_error().expect("count >= 3");
                let ms = sigma.iter().copied().fold(0.0, f64::max);
                max_sigma = Some(ms);
                let scale = if range < DEGENERATE_RANGE {
                    DEGENERATE_RANGE.max(c.abs() / d as f64)
                } else {
                    range
                };
                converged = ms < cfg.epsilon * scale;
            }
            last_sigma = max_sigma;

            trace.push(TraceRecord {
                n,
                beta: beta_vec,
                delta: delta_prev.clone(),
                variance: welford.variance(),
                max_sigma,
                range,
                r,
                flagged,
                evals,
                millis: start.elapsed().as_secs_f64() * 1e3,
            });
            if converged {
                break;
            }
        }

        let count = iterations.max(1) as f64;
        trace.mean_second_moment = Some(a_sum.iter().map(|x| x / count).collect());
        let attributions: Vec<f64> = beta.iter().copied().collect();
        let estimate = AttributionEstimate {
            beta: attributions.clone(),
            iteration: iterations,
            running_mean: welford.mean().to_vec(),
            running_m2: welford.m2().to_vec(),
            converged,
        };
        Ok(ExplanationReport {
            estimator: self.kind(),
            range: range_of(&attributions),
            attributions,
            boundary,
            iterations,
            evaluations: evals,
            converged,
            max_sigma: last_sigma,
            rejected_batches: rejected,
            jitter_applied: false,
            millis: start.elapsed().as_secs_f64() * 1e3,
            estimate,
            trace,
        })
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Plain SIM-Shapley: stability flags in `config` are ignored.
pub fn sim_shapley<G: CooperativeGame + ?Sized>(game: &mut G, config: &EstimatorConfig) -> Result<ExplanationReport> {
    let cfg = EstimatorConfig {
        bias_correction: false,
        negative_sampling_guard: false,
        ..config.clone()
    };
    SimShapley::new(cfg).run(game)
}

/// Stable SIM-Shapley: bias correction and negative-sampling guard on.
pub fn stable_sim_shapley<G: CooperativeGame + ?Sized>(
    game: &mut G,
    config: &EstimatorConfig,
) -> Result<ExplanationReport> {
    SimShapley::new(config.clone().stable()).run(game)
}
