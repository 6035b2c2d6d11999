//! Sliced inverse regression.
//!
//! Outputs are split into equal-count slices; the weighted outer products of
//! the within-slice input means give a matrix whose leading eigenvectors
//! span an estimate of the central subspace.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, sym_eigen};

#[derive(Clone, Debug, PartialEq)]
pub struct SirResult {
    /// Descending, non-negative.
    pub eigenvalues: Array1<f64>,
    /// Orthogonal `d × d`; row `k` is the `k`-th direction.
    pub directions: Array2<f64>,
    pub slice_counts: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SirOptions {
    /// Whiten the samples by their empirical covariance first.
    pub standardize: bool,
}

/// `max(5, min(10, ⌊M/20⌋))`.
pub fn default_slices(m: usize) -> usize {
    (m / 20).clamp(5, 10)
}

pub fn sir_fit(
    samples: ArrayView2<f64>,
    outputs: ArrayView1<f64>,
    slices: usize,
) -> Result<SirResult> {
    sir_fit_with(samples, outputs, slices, SirOptions::default())
}

pub fn sir_fit_with(
    samples: ArrayView2<f64>,
    outputs: ArrayView1<f64>,
    slices: usize,
    opts: SirOptions,
) -> Result<SirResult> {
    let (m, d) = samples.dim();
    if outputs.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: outputs.len(),
        });
    }
    if d == 0 {
        return Err(Error::invalid("samples have zero columns"));
    }
    if slices < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 slices, got {slices}"
        )));
    }
    if slices > m {
        return Err(Error::invalid(format!("{slices} slices for {m} samples")));
    }
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite output"));
    }
    let first = outputs[0];
    if outputs.iter().all(|&v| v == first) {
        return Err(Error::Degenerate("outputs are constant".into()));
    }

    let (x, whiten) = if opts.standardize {
        let (x, l) = standardize(samples)?;
        (x, Some(l))
    } else {
        (samples.to_owned(), None)
    };

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| outputs[a].total_cmp(&outputs[b]));

    let mut v = Array2::<f64>::zeros((d, d));
    let mut counts = Vec::with_capacity(slices);
    for h in 0..slices {
        let (lo, hi) = (h * m / slices, (h + 1) * m / slices);
        let rows = &order[lo..hi];
        counts.push(rows.len());
        if rows.is_empty() {
            continue;
        }
        let mean = x.select(Axis(0), rows).mean_axis(Axis(0)).unwrap();
        let w = rows.len() as f64 / m as f64;
        for i in 0..d {
            for j in 0..d {
                v[[i, j]] += w * mean[i] * mean[j];
            }
        }
    }
    let eig = sym_eigen(v.view())?;
    let mut directions = eig.eigenvectors.t().to_owned();
    if let Some(l) = whiten {
        // map directions back to original coordinates: Σ^{-1/2} u, re-orthonormalized
        directions = back_transform(&directions, &l);
    }
    Ok(SirResult {
        eigenvalues: eig.eigenvalues.mapv(|e| e.max(0.0)),
        directions,
        slice_counts: counts,
    })
}

fn standardize(samples: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let m = samples.nrows() as f64;
    let mean = samples.mean_axis(Axis(0)).unwrap();
    let centered = &samples - &mean;
    let cov = centered.t().dot(&centered) / (m - 1.0);
    let l = cholesky(cov.view())?;
    // x L⁻ᵀ row by row
    let d = l.nrows();
    let mut out = centered;
    for mut row in out.rows_mut() {
        for i in 0..d {
            let s: f64 = (0..i).map(|k| l[[i, k]] * row[k]).sum();
            row[i] = (row[i] - s) / l[[i, i]];
        }
    }
    Ok((out, l))
}

fn back_transform(dirs: &Array2<f64>, l: &Array2<f64>) -> Array2<f64> {
    // z = L⁻¹ x, so βᵀz = (L⁻ᵀβ)ᵀx
    let d = l.nrows();
    let mut out = Array2::<f64>::zeros((d, d));
    for (k, beta) in dirs.rows().into_iter().enumerate() {
        let mut y = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|r| l[[r, i]] * y[r]).sum();
            y[i] = (beta[i] - s) / l[[i, i]];
        }
        out.row_mut(k).assign(&Array1::from(y));
    }
    gram_schmidt(out)
}

fn gram_schmidt(mut a: Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    for k in 0..n {
        for j in 0..k {
            let p = a.row(k).dot(&a.row(j));
            let rj = a.row(j).to_owned();
            a.row_mut(k).scaled_add(-p, &rj);
        }
        let norm = a.row(k).dot(&a.row(k)).sqrt();
        a.row_mut(k).mapv_inplace(|x| x / norm);
    }
    a
}

/// First `d̃` directions as a `d̃ × d` row-orthonormal map.
pub fn reduce(result: &SirResult, d_tilde: usize) -> Result<Array2<f64>> {
    let d = result.directions.nrows();
    if d_tilde == 0 || d_tilde > d {
        return Err(Error::invalid(format!(
            "reduced dimension {d_tilde} outside 1..={d}"
        )));
    }
    Ok(result.directions.slice(s![..d_tilde, ..]).to_owned())
}

/// Smallest `d̃` with `Σ_{i≤d̃} λ_i ≥ a Σ λ_i`.
pub fn suggest_dtilde(result: &SirResult, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let total: f64 = result.eigenvalues.sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all SIR eigenvalues are zero".into()));
    }
    let mut acc = 0.0;
    for (k, &l) in result.eigenvalues.iter().enumerate() {
        acc += l;
        if acc >= fraction * total {
            return Ok(k + 1);
        }
    }
    Ok(result.eigenvalues.len())
}
