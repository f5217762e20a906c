//! Batch moments and the equality-constrained ridge solve shared by the
//! regression estimators.
//!
//! For a batch `{(z_i, v(z_i))}` with weights `w_i` (summing to one),
//!
//! ```text
//! A    = Σ w_i z_i z_iᵀ
//! Ā    = A + λ I
//! b̄    = Σ w_i z_i (v(z_i) - v(0))
//! ```
//!
//! and the constrained solve for a right-hand side `q` and level `c` is
//!
//! ```text
//! x = Ā⁻¹ [ q + 1 (c - 1ᵀĀ⁻¹q) / (1ᵀĀ⁻¹1) ]
//! ```
//!
//! which is the minimizer of `½ xᵀĀx - qᵀx` subject to `1ᵀx = c`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::coalition::Coalition;
use crate::error::{Result, ShapError};
use crate::sampling::Batch;

/// Relative pivot size below which a factorization is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchMoments {
    /// `Σ w_i z_i z_iᵀ`.
    pub a: DMatrix<f64>,
    /// `Σ w_i z_i (v(z_i) - v(0))`.
    pub b: DVector<f64>,
    pub lambda: f64,
}

impl BatchMoments {
    pub fn from_batch(batch: &Batch, values: &[f64], v_empty: f64, lambda: f64) -> Result<Self> {
        let d = batch
            .coalitions
            .first()
            .map(Coalition::len)
            .ok_or_else(|| ShapError::InvalidInput("empty coalition batch".into()))?;
        if values.len() != batch.len() {
            return Err(ShapError::DimensionMismatch {
                expected: batch.len(),
                actual: values.len(),
                context: "game values vs batch",
            });
        }
        let weights = batch.normalized_weights();
        let mut a = DMatrix::<f64>::zeros(d, d);
        let mut b = DVector::<f64>::zeros(d);
        let mut members = Vec::with_capacity(d);
        for ((z, &v), &w) in batch.coalitions.iter().zip(values).zip(&weights) {
            members.clear();
            members.extend(z.members());
            let y = w * (v - v_empty);
            for (pos, &i) in members.iter().enumerate() {
                b[i] += y;
                for &j in &members[..=pos] {
                    a[(i, j)] += w;
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                a[(j, i)] = a[(i, j)];
            }
        }
        Ok(BatchMoments { a, b, lambda })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `A + λI`.
    pub fn regularized(&self) -> DMatrix<f64> {
        let mut abar = self.a.clone();
        for i in 0..self.dim() {
            abar[(i, i)] += self.lambda;
        }
        abar
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        BatchMoments {
            a: self.a.clone(),
            b: self.b.clone(),
            lambda,
        }
    }
}

/// Cholesky factor of `Ā` together with `Ā⁻¹1`, reusable across right-hand sides.
pub struct ConstrainedRidge {
    chol: Cholesky<f64, Dyn>,
    abar_inv_ones: DVector<f64>,
    ones_abar_inv_ones: f64,
}

impl ConstrainedRidge {
    pub fn new(moments: &BatchMoments) -> Result<Self> {
        Self::factor(moments.regularized())
    }

    pub fn factor(abar: DMatrix<f64>) -> Result<Self> {
        let d = abar.nrows();
        let scale = (0..d).map(|i| abar[(i, i)].abs()).fold(0.0, f64::max);
        if scale == 0.0 || !scale.is_finite() {
            return Err(ShapError::Singular("regularized moment matrix is zero".into()));
        }
        let chol = abar.cholesky().ok_or_else(|| {
            ShapError::Singular("moment matrix is not positive definite".into())
        })?;
        let min_pivot = (0..d).map(|i| chol.l_dirty()[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot * min_pivot < PIVOT_TOLERANCE * scale {
            return Err(ShapError::Singular(format!(
                "moment matrix is numerically singular (min pivot² {:.3e}, scale {scale:.3e})",
                min_pivot * min_pivot
            )));
        }
        let abar_inv_ones = chol.solve(&DVector::from_element(d, 1.0));
        let ones_abar_inv_ones = abar_inv_ones.sum();
        Ok(ConstrainedRidge {
            chol,
            abar_inv_ones,
            ones_abar_inv_ones,
        })
    }

    /// `Ā⁻¹ [q + 1 (c - 1ᵀĀ⁻¹q) / (1ᵀĀ⁻¹1)]`.
    pub fn solve(&self, q: &DVector<f64>, c: f64) -> DVector<f64> {
        let abar_inv_q = self.chol.solve(q);
        let kappa = (c - abar_inv_q.sum()) / self.ones_abar_inv_ones;
        abar_inv_q + &self.abar_inv_ones * kappa
    }
}

/// Minimizer of `½ xᵀĀx - targetᵀx` subject to `1ᵀx = c`.
pub fn solve_constrained_ridge(moments: &BatchMoments, target: &[f64], c: f64) -> Result<Vec<f64>> {
    if target.len() != moments.dim() {
        return Err(ShapError::DimensionMismatch {
            expected: moments.dim(),
            actual: target.len(),
            context: "constrained solve target",
        });
    }
    let solver = ConstrainedRidge::new(moments)?;
    Ok(solver.solve(&DVector::from_column_slice(target), c).iter().copied().collect())
}
