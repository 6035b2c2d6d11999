use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Compressed-sparse-row square matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(Error::invalid(format!(
                "triplet ({r}, {c}) outside {n}x{n}"
            )));
        }
        triplets.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[row.clone()].binary_search(&c) {
            Ok(k) => self.vals[row.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let x = x.to_vec();
        let mut y = vec![0.0; self.n];
        self.mul_into(&x, &mut y);
        Array1::from(y)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive-definite `A` by Jacobi-preconditioned
/// conjugate gradients, capped at `10 n` iterations.
///
/// The returned solution satisfies `‖A x − b‖₂ ≤ 1e-10 ‖b‖₂`.
pub fn solve_sym_sparse(a: &CsrMatrix, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let b = b.to_vec();
    let b_norm = dot(&b, &b).sqrt();
    if b_norm == 0.0 {
        return Ok(Array1::zeros(n));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { Ok(1.0 / d) } else { Err(d) })
        .collect::<std::result::Result<_, _>>()
        .map_err(|d| Error::numerical(format!("non-positive diagonal entry {d}")))?;

    let target = 1e-13 * b_norm;
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 10 * n;
    for _ in 0..max_iter {
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::numerical(
                "conjugate gradient breakdown: matrix not SPD",
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= target {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    a.mul_into(&x, &mut ap);
    let true_res = ap
        .iter()
        .zip(&b)
        .map(|(ax, b)| (ax - b) * (ax - b))
        .sum::<f64>()
        .sqrt();
    if true_res > 1e-10 * b_norm {
        return Err(Error::numerical(format!(
            "conjugate gradient stalled at relative residual {:e}",
            true_res / b_norm
        )));
    }
    Ok(Array1::from(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t).unwrap()
    }

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
                .unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let b = array![1.5, -2.0, 3.25];
        let x = solve_sym_sparse(&CsrMatrix::identity(3), b.view()).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn tridiagonal_matches_dense_elimination() {
        let a = laplacian_1d(5);
        let b = array![0.0, 0.0, 1.0, 0.0, 0.0];
        let x = solve_sym_sparse(&a, b.view()).unwrap();
        let dense: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| a.get(i, j)).collect())
            .collect();
        let oracle = dense_solve(dense, b.to_vec());
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-12, "{xi} vs {oi}");
        }
        // the Green's function column: min(i,j)(n+1-max(i,j))/(n+1)
        assert!((x[2] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn grid_laplacian_reproduces_linear_interpolant() {
        // 61x31 nodes, Dirichlet data u = 2 + 0.5 i + 0.25 j on the boundary
        let (nx, ny) = (61usize, 31usize);
        let exact = |i: usize, j: usize| 2.0 + 0.5 * i as f64 + 0.25 * j as f64;
        let interior = |i: usize, j: usize| (j - 1) * (nx - 2) + (i - 1);
        let n = (nx - 2) * (ny - 2);
        let mut t = Vec::new();
        let mut b = vec![0.0; n];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let row = interior(i, j);
                t.push((row, row, 4.0));
                for (ii, jj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                    if ii == 0 || jj == 0 || ii == nx - 1 || jj == ny - 1 {
                        b[row] += exact(ii, jj);
                    } else {
                        t.push((row, interior(ii, jj), -1.0));
                    }
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, t).unwrap();
        let x = solve_sym_sparse(&a, Array1::from(b).view()).unwrap();
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                assert!((x[interior(i, j)] - exact(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(matches!(
            solve_sym_sparse(&a, array![1.0, 1.0].view()),
            Err(Error::NumericalFailure(_))
        ));
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 2);
    }
}
