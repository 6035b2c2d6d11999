use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default limit on the number of basis terms.
pub const DEFAULT_BASIS_CAP: usize = 1_000_000;

/// Exponents `α = (α₁, …, α_d)` of one tensor-product Hermite polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(degrees: Vec<u32>) -> Self {
        Self(degrees)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn degrees(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `(dimension, degree)` pairs with non-zero degree.
    pub fn support(&self) -> Vec<(usize, u32)> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, &a)| (i, a))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisMode {
    /// Every multi-index with total degree at most `P`.
    Full,
    /// The constant plus pure powers `k·e_i`, `1 ≤ k ≤ P`.
    NoInteraction,
}

impl std::str::FromStr for BasisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "no-interaction" => Ok(Self::NoInteraction),
            other => Err(Error::invalid(format!("unknown basis mode '{other}'"))),
        }
    }
}

/// Ordered set of multi-indices defining the columns of every measurement
/// matrix and the layout of every coefficient vector.
///
/// Ordering is graded: by total degree, then decreasing lexicographic within
/// a degree, so `e₁` precedes `e₂`. Position 0 is always the constant.
#[derive(Clone, Debug)]
pub struct MultiIndexBasis {
    dim: usize,
    order: u32,
    mode: BasisMode,
    indices: Vec<MultiIndex>,
    supports: Vec<Vec<(usize, u32)>>,
    lookup: HashMap<MultiIndex, usize>,
}

/// `C(P + d, d)` without overflow, or `None` beyond `u128`.
pub fn full_basis_size(dim: usize, order: u32) -> Option<u128> {
    let mut acc: u128 = 1;
    for k in 1..=order as u128 {
        acc = acc.checked_mul(dim as u128 + k)? / k;
    }
    Some(acc)
}

pub fn enumerate_basis(dim: usize, order: u32, mode: BasisMode) -> Result<MultiIndexBasis> {
    enumerate_basis_capped(dim, order, mode, DEFAULT_BASIS_CAP)
}

pub fn enumerate_basis_capped(
    dim: usize,
    order: u32,
    mode: BasisMode,
    cap: usize,
) -> Result<MultiIndexBasis> {
    if dim == 0 {
        return Err(Error::invalid("basis dimension must be at least 1"));
    }
    let requested = match mode {
        BasisMode::Full => full_basis_size(dim, order).unwrap_or(u128::MAX),
        BasisMode::NoInteraction => 1 + dim as u128 * order as u128,
    };
    if requested > cap as u128 {
        return Err(Error::Capacity { requested, cap });
    }
    let mut indices = Vec::with_capacity(requested as usize);
    for degree in 0..=order {
        match mode {
            BasisMode::Full => {
                let mut current = vec![0u32; dim];
                compositions(degree, 0, &mut current, &mut indices);
            }
            BasisMode::NoInteraction => {
                if degree == 0 {
                    indices.push(MultiIndex::zero(dim));
                } else {
                    for i in 0..dim {
                        let mut a = vec![0u32; dim];
                        a[i] = degree;
                        indices.push(MultiIndex(a));
                    }
                }
            }
        }
    }
    Ok(MultiIndexBasis::from_indices(dim, order, mode, indices))
}

/// Pushes every composition of `remaining` into the slots `pos..` in
/// decreasing lexicographic order.
fn compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        current[pos] = 0;
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first;
        compositions(remaining - first, pos + 1, current, out);
    }
    current[pos] = 0;
}

impl MultiIndexBasis {
    fn from_indices(dim: usize, order: u32, mode: BasisMode, indices: Vec<MultiIndex>) -> Self {
        let supports = indices.iter().map(MultiIndex::support).collect();
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(k, a)| (a.clone(), k))
            .collect();
        Self {
            dim,
            order,
            mode,
            indices,
            supports,
            lookup,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index(&self, k: usize) -> &MultiIndex {
        &self.indices[k]
    }

    pub(crate) fn support(&self, k: usize) -> &[(usize, u32)] {
        &self.supports[k]
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    fn check_points(&self, points: ArrayView2<f64>) -> Result<()> {
        if points.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: points.ncols(),
            });
        }
        Ok(())
    }

    /// `ψ_k(x)` for every basis term at one point.
    pub fn eval_point(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let p = self.order as usize;
        let table: Vec<Vec<f64>> = x.iter().map(|&xi| eval_univariate_all(p, xi)).collect();
        self.supports
            .iter()
            .map(|s| s.iter().map(|&(i, a)| table[i][a as usize]).product())
            .collect()
    }

    /// `u(x) = Σ c_k ψ_k(x)` for every row of `points`.
    pub fn eval_expansion(
        &self,
        coeffs: ArrayView1<f64>,
        points: ArrayView2<f64>,
    ) -> Result<Array1<f64>> {
        self.check_points(points)?;
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        Ok(points
            .rows()
            .into_iter()
            .map(|row| {
                self.eval_point(row)
                    .iter()
                    .zip(coeffs.iter())
                    .map(|(p, c)| p * c)
                    .sum()
            })
            .collect())
    }
}

/// `Ψ` with `Ψ[q, n] = ψ_n(x_q)`.
pub fn measurement_matrix(basis: &MultiIndexBasis, points: ArrayView2<f64>) -> Result<Array2<f64>> {
    basis.check_points(points)?;
    let (m, n) = (points.nrows(), basis.len());
    let mut psi = Array2::<f64>::zeros((m, n));
    for (mut out, row) in psi.rows_mut().into_iter().zip(points.rows()) {
        for (o, v) in out.iter_mut().zip(basis.eval_point(row)) {
            *o = v;
        }
    }
    Ok(psi)
}

/// Normalized probabilists' Hermite polynomial `He_n(x) / √(n!)`.
pub fn eval_univariate(n: u32, x: f64) -> f64 {
    eval_univariate_all(n as usize, x)[n as usize]
}

/// `ψ_0(x), …, ψ_p(x)`.
pub fn eval_univariate_all(p: usize, x: f64) -> Vec<f64> {
    let mut he = vec![0.0; p + 1];
    he[0] = 1.0;
    if p >= 1 {
        he[1] = x;
    }
    for k in 1..p {
        he[k + 1] = x * he[k] - k as f64 * he[k - 1];
    }
    let mut fact = 1.0;
    for (k, h) in he.iter_mut().enumerate().skip(1) {
        fact *= k as f64;
        *h /= fact.sqrt();
    }
    he
}
