use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};

use super::basis::{MultiIndex, MultiIndexBasis};
use crate::error::{Error, Result};

/// Sparse `N × N` matrix `(K_ij)_kl = E[∂ψ_k/∂ξ_i · ∂ψ_l/∂ξ_j]` stored as
/// row-sorted triplets. Dimensions `i`, `j` are zero-based.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    pub i: usize,
    pub j: usize,
    pub size: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl KernelMatrix {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries
            .iter()
            .find(|&&(r, c, _)| r == k && c == l)
            .map_or(0.0, |e| e.2)
    }

    pub fn transpose(&self) -> KernelMatrix {
        let mut entries: Vec<_> = self.entries.iter().map(|&(k, l, v)| (l, k, v)).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        KernelMatrix {
            i: self.j,
            j: self.i,
            size: self.size,
            entries,
        }
    }

    /// `cᵀ K c`.
    pub fn quad_form(&self, c: ArrayView1<f64>) -> f64 {
        self.entries.iter().map(|&(k, l, v)| c[k] * v * c[l]).sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.size, self.size));
        for &(k, l, v) in &self.entries {
            out[[k, l]] += v;
        }
        out
    }
}

/// Closed-form kernel from `∂ψ_α/∂ξ_i = √α_i ψ_{α−e_i}`:
///
/// * `i ≠ j`: `√((α_k)_i (α_l)_j)` when `α_l = α_k − e_i + e_j`;
/// * `i = j`: `(α_k)_i` on the diagonal.
pub fn grad_kernel(basis: &MultiIndexBasis, i: usize, j: usize) -> Result<KernelMatrix> {
    let d = basis.dim();
    if i >= d || j >= d {
        return Err(Error::invalid(format!(
            "kernel dimensions ({i}, {j}) out of range for d = {d}"
        )));
    }
    let mut entries = Vec::new();
    for (k, alpha) in basis.indices().iter().enumerate() {
        let ai = alpha.degrees()[i];
        if ai == 0 {
            continue;
        }
        if i == j {
            entries.push((k, k, ai as f64));
            continue;
        }
        let mut target = alpha.degrees().to_vec();
        target[i] -= 1;
        target[j] += 1;
        if let Some(l) = basis.position(&MultiIndex::new(target)) {
            let alj = basis.index(l).degrees()[j];
            entries.push((k, l, ((ai * alj) as f64).sqrt()));
        }
    }
    Ok(KernelMatrix {
        i,
        j,
        size: basis.len(),
        entries,
    })
}

/// All `d²` kernels of a basis in factored form `K_ij = D_iᵀ D_j`, where
/// `D_i` maps basis term `k` to the lowered index `α_k − e_i` with weight
/// `√(α_k)_i`. Each `D_i` has at most one entry per column, so the set costs
/// `O(N d)` storage regardless of how many `(i, j)` pairs are queried.
#[derive(Clone, Debug)]
pub struct KernelSet {
    dim: usize,
    size: usize,
    lowered_count: usize,
    /// Per dimension: `(basis term k, lowered index m, √(α_k)_i)`.
    derivatives: Vec<Vec<(usize, usize, f64)>>,
}

impl KernelSet {
    pub fn new(basis: &MultiIndexBasis) -> Self {
        let d = basis.dim();
        let mut lowered: HashMap<MultiIndex, usize> = HashMap::new();
        let mut derivatives = vec![Vec::new(); d];
        for k in 0..basis.len() {
            let alpha = basis.index(k);
            for &(i, a) in basis.support(k) {
                let mut beta = alpha.degrees().to_vec();
                beta[i] -= 1;
                let next = lowered.len();
                let m = *lowered.entry(MultiIndex::new(beta)).or_insert(next);
                derivatives[i].push((k, m, (a as f64).sqrt()));
            }
        }
        Self {
            dim: d,
            size: basis.len(),
            lowered_count: lowered.len(),
            derivatives,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Materializes `K_ij` as triplets.
    pub fn kernel(&self, i: usize, j: usize) -> Result<KernelMatrix> {
        if i >= self.dim || j >= self.dim {
            return Err(Error::invalid(format!(
                "kernel dimensions ({i}, {j}) out of range for d = {}",
                self.dim
            )));
        }
        let by_lowered: HashMap<usize, (usize, f64)> = self.derivatives[j]
            .iter()
            .map(|&(l, m, w)| (m, (l, w)))
            .collect();
        let mut entries: Vec<_> = self.derivatives[i]
            .iter()
            .filter_map(|&(k, m, wk)| by_lowered.get(&m).map(|&(l, wl)| (k, l, wk * wl)))
            .collect();
        entries.sort_by_key(|e| (e.0, e.1));
        Ok(KernelMatrix {
            i,
            j,
            size: self.size,
            entries,
        })
    }

    /// `G_ij = cᵀ K_ij c` for all `i, j`, symmetrized.
    pub fn gradient_matrix(&self, coeffs: ArrayView1<f64>) -> Result<Array2<f64>> {
        if coeffs.len() != self.size {
            return Err(Error::DimensionMismatch {
                expected: self.size,
                found: coeffs.len(),
            });
        }
        // g[m] lists (i, ∂_i u coefficient on lowered term m)
        let mut grads: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.lowered_count];
        for (i, list) in self.derivatives.iter().enumerate() {
            for &(k, m, w) in list {
                let v = coeffs[k] * w;
                if v != 0.0 {
                    grads[m].push((i, v));
                }
            }
        }
        let d = self.dim;
        let mut g = Array2::<f64>::zeros((d, d));
        for terms in &grads {
            for &(i, vi) in terms {
                for &(j, vj) in terms {
                    g[[i, j]] += vi * vj;
                }
            }
        }
        let sym = (&g + &g.t()) * 0.5;
        Ok(sym)
    }
}
