//! Coalitions of features and the Shapley kernel.
//!
//! A coalition is the indicator vector `z` of a feature subset `S`: `z[i]` is
//! set exactly when feature `i` is present. Index encoding maps bit `i` of an
//! integer to entry `i` of the coalition, which is how the exact oracle and
//! tabulated games address all `2^d` subsets.

use crate::error::{Result, ShapError};

/// Largest feature count accepted by exhaustive (2^d) code paths.
pub const ENUMERATION_CAP: usize = 20;

/// Binary indicator vector over `d` features.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coalition {
    bits: Vec<bool>,
}

impl Coalition {
    pub fn new(bits: Vec<bool>) -> Self {
        Coalition { bits }
    }

    pub fn empty(d: usize) -> Self {
        Coalition { bits: vec![false; d] }
    }

    pub fn full(d: usize) -> Self {
        Coalition { bits: vec![true; d] }
    }

    /// Builds a coalition containing exactly the listed features.
    pub fn from_members(d: usize, members: &[usize]) -> Result<Self> {
        let mut bits = vec![false; d];
        for &i in members {
            if i >= d {
                return Err(ShapError::InvalidInput(format!(
                    "feature index {i} out of range for d = {d}"
                )));
            }
            bits[i] = true;
        }
        Ok(Coalition { bits })
    }

    /// Decodes `index` so that bit `i` becomes entry `i`.
    pub fn from_index(index: u64, d: usize) -> Result<Self> {
        check_enumerable(d)?;
        if index >> d != 0 {
            return Err(ShapError::InvalidInput(format!(
                "coalition index {index} out of range for d = {d}"
            )));
        }
        Ok(Coalition {
            bits: (0..d).map(|i| (index >> i) & 1 == 1).collect(),
        })
    }

    /// Inverse of [`Coalition::from_index`].
    pub fn to_index(&self) -> Result<u64> {
        check_enumerable(self.len())?;
        Ok(self
            .bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| if b { acc | (1 << i) } else { acc }))
    }

    /// Parses a bitstring with feature 0 leftmost, e.g. `"101"`.
    pub fn parse_bitstring(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ShapError::InvalidInput(format!(
                    "invalid character {other:?} in coalition bitstring {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(ShapError::InvalidInput("empty coalition bitstring".into()));
        }
        Ok(Coalition { bits })
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of present features, ascending.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn complement(&self) -> Self {
        Coalition {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// `zᵀβ`.
    pub fn dot(&self, beta: &[f64]) -> f64 {
        self.members().map(|i| beta[i]).sum()
    }
}

pub(crate) fn check_enumerable(d: usize) -> Result<()> {
    if d > ENUMERATION_CAP {
        Err(ShapError::EnumerationCap {
            d,
            cap: ENUMERATION_CAP,
        })
    } else {
        Ok(())
    }
}

/// `ln C(n, k)`, accurate for the feature counts handled here.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k)
        .map(|j| ((n - k + j) as f64 / j as f64).ln())
        .sum()
}

/// Unnormalized Shapley kernel mass of one coalition of size `size` out of `d`:
/// `(d - 1) / (C(d, size) * size * (d - size))`.
pub fn shapley_kernel_weight(d: usize, size: usize) -> Result<f64> {
    if size == 0 || size >= d {
        return Err(ShapError::Domain(format!(
            "Shapley kernel diverges for subset size {size} with d = {d}"
        )));
    }
    let per_size = size_kernel_mass(d, size);
    Ok((per_size.ln() - ln_binomial(d, size)).exp())
}

/// Total kernel mass over all coalitions of one size: `(d - 1) / (k (d - k))`.
pub(crate) fn size_kernel_mass(d: usize, k: usize) -> f64 {
    (d - 1) as f64 / (k as f64 * (d - k) as f64)
}

/// Iterates over every coalition of `d` features in index order.
pub fn all_coalitions(d: usize) -> Result<impl Iterator<Item = Coalition>> {
    check_enumerable(d)?;
    Ok((0..1u64 << d).map(move |idx| Coalition {
        bits: (0..d).map(|i| (idx >> i) & 1 == 1).collect(),
    }))
}
