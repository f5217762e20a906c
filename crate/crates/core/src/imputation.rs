//! Filling in the features a coalition leaves out.
//!
//! The marginal imputer replaces absent features with each row of a
//! background set in turn, so the model output averaged over completions
//! approximates `E[f(x_S, X_{S^c})]` under the joint marginal of `X_{S^c}`.
//! The mean imputer uses a single completion with the column means.

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::data::FeatureMatrix;
use crate::error::{Result, ShapError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    rows: FeatureMatrix,
}

impl BackgroundSet {
    pub fn new(rows: FeatureMatrix) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(ShapError::InvalidInput("background set is empty".into()));
        }
        Ok(BackgroundSet { rows })
    }

    pub fn rows(&self) -> &FeatureMatrix {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn num_features(&self) -> usize {
        self.rows.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Imputer {
    /// One completion per background row.
    Marginal(BackgroundSet),
    /// A single completion from these column means.
    Mean(Vec<f64>),
}

impl Imputer {
    pub fn marginal(background: BackgroundSet) -> Self {
        Imputer::Marginal(background)
    }

    /// Mean imputer whose fill values are the column means of `data`.
    pub fn mean_of(data: &FeatureMatrix) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(ShapError::InvalidInput("cannot take means of an empty matrix".into()));
        }
        Ok(Imputer::Mean(data.column_means()))
    }

    pub fn num_features(&self) -> usize {
        match self {
            Imputer::Marginal(bg) => bg.num_features(),
            Imputer::Mean(m) => m.len(),
        }
    }

    fn check(&self, x: &[f64], z: &Coalition) -> Result<()> {
        let d = self.num_features();
        if x.len() != d {
            return Err(ShapError::DimensionMismatch {
                expected: d,
                actual: x.len(),
                context: "instance passed to imputer",
            });
        }
        if z.len() != d {
            return Err(ShapError::DimensionMismatch {
                expected: d,
                actual: z.len(),
                context: "coalition passed to imputer",
            });
        }
        Ok(())
    }

    /// All completions of `x` under `z`, one row each.
    ///
    /// A full coalition has nothing to impute and yields `x` alone.
    pub fn complete(&self, x: &[f64], z: &Coalition) -> Result<FeatureMatrix> {
        self.check(x, z)?;
        let d = x.len();
        let mut data = Vec::new();
        let mut count = 0;
        self.for_each_completion(x, z, |row| {
            data.extend_from_slice(row);
            count += 1;
        });
        FeatureMatrix::from_vec(count, d, data)
    }

    /// Calls `f` on each completion, reusing one buffer. Callers must have
    /// checked dimensions.
    pub(crate) fn for_each_completion(&self, x: &[f64], z: &Coalition, mut f: impl FnMut(&[f64])) {
        if z.popcount() == z.len() {
            f(x);
            return;
        }
        let bits = z.bits();
        let mut buf = x.to_vec();
        let fill = |buf: &mut Vec<f64>, source: &[f64]| {
            for (i, &present) in bits.iter().enumerate() {
                if !present {
                    buf[i] = source[i];
                }
            }
        };
        match self {
            Imputer::Marginal(bg) => {
                for row in bg.rows().rows() {
                    fill(&mut buf, row);
                    f(&buf);
                }
            }
            Imputer::Mean(means) => {
                fill(&mut buf, means);
                f(&buf);
            }
        }
    }

    pub(crate) fn validate_instance(&self, x: &[f64]) -> Result<()> {
        self.check(x, &Coalition::full(x.len()))
    }
}
