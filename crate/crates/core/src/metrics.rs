//! Accuracy metrics and convergence-rate diagnostics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};
use crate::estimators::{BatchMoments, IterationTrace};

/// Iterations skipped before fitting a rate unless told otherwise.
pub const DEFAULT_BURN_IN: usize = 10;

/// Errors below this fraction of the reference norm are treated as converged to
/// working precision and end the fit window.
const NUMERICAL_ZERO: f64 = 1e-10;

/// Euclidean distance between an estimate and a reference.
pub fn l2_bias(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(ShapError::DimensionMismatch {
            expected: reference.len(),
            actual: estimate.len(),
            context: "l2 bias",
        });
    }
    Ok(estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Sample Pearson correlation.
pub fn pearson_consistency(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ShapError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
            context: "pearson consistency",
        });
    }
    if a.len() < 2 {
        return Err(ShapError::InvalidInput(format!(
            "correlation needs at least 2 points, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(ShapError::Domain("correlation is undefined for a constant vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Orthonormal basis of the complement of the all-ones direction (Helmert
/// contrasts), as the columns of a `d × (d-1)` matrix.
fn ones_complement_basis(d: usize) -> DMatrix<f64> {
    let mut q = DMatrix::<f64>::zeros(d, d - 1);
    for k in 1..d {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

/// Smallest eigenvalue of a symmetric `A` restricted to the subspace
/// orthogonal to the all-ones vector.
pub fn constrained_min_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(ShapError::DimensionMismatch {
            expected: d,
            actual: a.ncols(),
            context: "square moment matrix",
        });
    }
    if d < 2 {
        return Err(ShapError::InvalidInput("restricted spectrum needs d >= 2".into()));
    }
    let q = ones_complement_basis(d);
    let restricted = q.transpose() * a * &q;
    let sym = (&restricted + restricted.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `t λ / (α + λ)`.
pub fn theoretical_rho(t: f64, lambda: f64, alpha: f64) -> f64 {
    t * lambda / (alpha + lambda)
}

/// The point the plain momentum iteration converges to on fixed moments:
/// `(A + (1-t)λI) β = b̄ + κ1` with `1ᵀβ = c`.
pub fn momentum_fixed_point(moments: &BatchMoments, t: f64, c: f64) -> Result<Vec<f64>> {
    let shifted = moments.with_lambda((1.0 - t) * moments.lambda);
    crate::estimators::solve_constrained_ridge(&shifted, moments.b.as_slice(), c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceRateReport {
    pub fitted_rho: f64,
    pub theoretical_rho: f64,
    pub alpha: f64,
    pub r2: f64,
    /// Iterations used by the fit.
    pub window: (usize, usize),
    /// Set when the error reached numerical zero and the window was cut short.
    pub truncated: bool,
}

struct LineFit {
    slope: f64,
    r2: f64,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LineFit { slope, r2 }
}

/// Fits `‖β⁽ⁿ⁾ - reference‖ ≈ C ρⁿ` over the iterations after `burn_in`.
///
/// The theoretical rate uses the trace's momentum, ridge coefficient and
/// average moment matrix.
pub fn fit_q_rate(trace: &IterationTrace, reference: &[f64], burn_in: usize) -> Result<ConvergenceRateReport> {
    let d = reference.len();
    let (Some(t), Some(lambda), Some(a)) = (trace.momentum, trace.lambda, trace.mean_second_moment.as_ref()) else {
        return Err(ShapError::InvalidInput(
            "rate fit needs a trace carrying momentum, lambda and the mean moment matrix".into(),
        ));
    };
    if a.len() != d * d {
        return Err(ShapError::DimensionMismatch {
            expected: d * d,
            actual: a.len(),
            context: "mean moment matrix",
        });
    }
    if trace.len() <= burn_in + 1 {
        return Err(ShapError::InvalidInput(format!(
            "trace of {} iterations is too short for burn-in {burn_in}",
            trace.len()
        )));
    }
    let floor = NUMERICAL_ZERO * DVector::from_column_slice(reference).norm().max(f64::MIN_POSITIVE);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut truncated = false;
    for rec in trace.records.iter().filter(|r| r.n > burn_in) {
        let err = l2_bias(&rec.beta, reference)?;
        if !(err > floor) {
            truncated = true;
            break;
        }
        xs.push(rec.n as f64);
        ys.push(err.ln());
    }
    if xs.len() < 3 {
        return Err(ShapError::Domain(format!(
            "only {} iterations with error above numerical zero after burn-in {burn_in}",
            xs.len()
        )));
    }
    let fit = fit_line(&xs, &ys);
    let alpha = constrained_min_eigenvalue(&DMatrix::from_row_slice(d, d, a))?;
    Ok(ConvergenceRateReport {
        fitted_rho: fit.slope.exp(),
        theoretical_rho: theoretical_rho(t, lambda, alpha),
        alpha,
        r2: fit.r2,
        window: (xs[0] as usize, *xs.last().expect("non-empty") as usize),
        truncated,
    })
}
