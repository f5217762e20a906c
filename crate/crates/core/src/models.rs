//! Built-in linear and logistic models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Result, ShapError};

/// Anything that maps a feature row to a scalar prediction.
pub trait Model: Send + Sync {
    fn num_features(&self) -> usize;

    fn predict_row(&self, x: &[f64]) -> f64;

    /// Whether outputs are probabilities in `(0, 1)`.
    fn outputs_probability(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearRegression,
    LogisticRegression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveModel {
    pub kind: ModelKind,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl PredictiveModel {
    pub fn linear(weights: Vec<f64>, intercept: f64) -> Self {
        PredictiveModel {
            kind: ModelKind::LinearRegression,
            weights,
            intercept,
        }
    }

    pub fn logistic(weights: Vec<f64>, intercept: f64) -> Self {
        PredictiveModel {
            kind: ModelKind::LogisticRegression,
            weights,
            intercept,
        }
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.ncols() != self.weights.len() {
            return Err(ShapError::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.ncols(),
                context: "prediction input columns",
            });
        }
        Ok(x.rows().map(|row| self.predict_row(row)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| ShapError::InvalidInput(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| ShapError::InvalidInput(format!("model json: {e}")))
    }

    /// Ridge regression with an unpenalized intercept, solved from the centered
    /// normal equations.
    pub fn fit_linear(x: &FeatureMatrix, y: &[f64], ridge: f64) -> Result<Self> {
        check_shapes(x, y)?;
        if !(ridge >= 0.0) {
            return Err(ShapError::InvalidInput(format!("ridge must be non-negative, got {ridge}")));
        }
        let n = x.nrows() as f64;
        let d = x.ncols();
        let x_mean = x.column_means();
        let y_mean = y.iter().sum::<f64>() / n;

        let mut gram = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        for (row, &yi) in x.rows().zip(y) {
            let centered: Vec<f64> = row.iter().zip(&x_mean).map(|(a, m)| a - m).collect();
            for i in 0..d {
                rhs[i] += centered[i] * (yi - y_mean);
                for j in 0..=i {
                    gram[(i, j)] += centered[i] * centered[j];
                }
            }
        }
        for i in 0..d {
            gram[(i, i)] += ridge;
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        let scale = (0..d).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        let chol = gram.cholesky().ok_or_else(|| {
            ShapError::Singular("normal equations are rank deficient; use ridge > 0".into())
        })?;
        let min_pivot = (0..d).map(|i| chol.l_dirty()[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot * min_pivot < 1e-12 * scale {
            return Err(ShapError::Singular(
                "normal equations are numerically rank deficient; use ridge > 0".into(),
            ));
        }
        let w = chol.solve(&rhs);
        let intercept = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
        Ok(PredictiveModel::linear(w.iter().copied().collect(), intercept))
    }

    /// L2-regularized logistic regression by damped Newton steps with a
    /// backtracking line search. The intercept is not penalized. Stops when the
    /// gradient norm drops below `1e-8` or after `max_iter` steps.
    pub fn fit_logistic(x: &FeatureMatrix, y: &[f64], l2: f64, max_iter: usize) -> Result<Self> {
        check_shapes(x, y)?;
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(ShapError::InvalidInput(format!(
                "logistic labels must be 0 or 1; row {i} has {}",
                y[i]
            )));
        }
        if !(l2 >= 0.0) {
            return Err(ShapError::InvalidInput(format!("l2 must be non-negative, got {l2}")));
        }
        let d = x.ncols();
        let p = d + 1;
        let n = x.nrows() as f64;
        // theta = (w_0..w_{d-1}, b)
        let mut theta = DVector::<f64>::zeros(p);

        let objective = |theta: &DVector<f64>| -> f64 {
            let mut loss = 0.0;
            for (row, &yi) in x.rows().zip(y) {
                let s = theta[d] + (0..d).map(|j| theta[j] * row[j]).sum::<f64>();
                // log(1 + e^s) - y s, evaluated stably
                loss += s.max(0.0) + (-s.abs()).exp().ln_1p() - yi * s;
            }
            loss / n + 0.5 * l2 * (0..d).map(|j| theta[j] * theta[j]).sum::<f64>()
        };

        for _ in 0..max_iter {
            let mut grad = DVector::<f64>::zeros(p);
            let mut hess = DMatrix::<f64>::zeros(p, p);
            for (row, &yi) in x.rows().zip(y) {
                let s = theta[d] + (0..d).map(|j| theta[j] * row[j]).sum::<f64>();
                let prob = sigmoid(s);
                let wgt = prob * (1.0 - prob);
                let feat = |j: usize| if j < d { row[j] } else { 1.0 };
                for i in 0..p {
                    grad[i] += (prob - yi) * feat(i);
                    for j in 0..=i {
                        hess[(i, j)] += wgt * feat(i) * feat(j);
                    }
                }
            }
            grad /= n;
            hess /= n;
            for i in 0..d {
                grad[i] += l2 * theta[i];
                hess[(i, i)] += l2;
            }
            if grad.norm() < 1e-8 {
                break;
            }
            for i in 0..p {
                hess[(i, i)] += 1e-10;
                for j in 0..i {
                    hess[(j, i)] = hess[(i, j)];
                }
            }
            let step = match hess.cholesky() {
                Some(chol) => chol.solve(&grad),
                None => grad.clone(),
            };
            let current = objective(&theta);
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..50 {
                let candidate = &theta - &step * scale;
                if objective(&candidate) <= current {
                    theta = candidate;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(ShapError::NonFinite("logistic fit diverged".into()));
        }
        Ok(PredictiveModel::logistic(
            theta.iter().take(d).copied().collect(),
            theta[d],
        ))
    }
}

fn check_shapes(x: &FeatureMatrix, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(ShapError::InvalidInput("cannot fit a model on zero rows".into()));
    }
    if x.nrows() != y.len() {
        return Err(ShapError::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
            context: "labels vs rows",
        });
    }
    Ok(())
}

impl Model for PredictiveModel {
    fn num_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::LinearRegression => self.logit(x),
            ModelKind::LogisticRegression => sigmoid(self.logit(x)),
        }
    }

    fn outputs_probability(&self) -> bool {
        self.kind == ModelKind::LogisticRegression
    }
}
