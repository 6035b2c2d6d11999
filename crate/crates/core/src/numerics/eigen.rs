use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = Q Λ Qᵀ` of a real symmetric matrix.
///
/// Eigenvalues are sorted descending and column `k` of `eigenvectors` pairs
/// with `eigenvalues[k]`. Each column is signed so that its entry of largest
/// magnitude (lowest index on ties) is non-negative.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

/// Cyclic Jacobi eigensolver for dense symmetric matrices.
pub fn sym_eigen(a: ArrayView2<f64>) -> Result<SymEigen> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::invalid(format!(
            "matrix must be square, got {n}x{m}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("matrix must be non-empty"));
    }
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !scale.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (a[[i, j]], a[[j, i]]);
            if (x - y).abs() > 1e-12 * scale {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i}, {j}): {x} vs {y}"
                )));
            }
            w[i * n + j] = 0.5 * (x + y);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut converged = n == 1;
    for sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| w[p * n + q].abs())
            .sum();
        if off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                // once rotations stop changing the diagonal, zero the entry
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    w[p * n + q] = 0.0;
                    w[q * n + p] = 0.0;
                    continue;
                }
                rotate(&mut w, &mut v, n, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their diagonal order
    order.sort_by(|&i, &j| w[j * n + j].total_cmp(&w[i * n + i]));
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| w[i * n + i]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (k, &src) in order.iter().enumerate() {
        let mut lead = 0;
        for r in 1..n {
            if v[r * n + src].abs() > v[lead * n + src].abs() {
                lead = r;
            }
        }
        let sign = if v[lead * n + src] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            eigenvectors[[r, k]] = sign * v[r * n + src];
        }
    }
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// One Jacobi rotation annihilating `w[p, q]`; `w` is full symmetric storage.
fn rotate(w: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = w[p * n + q];
    let theta = (w[q * n + q] - w[p * n + p]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    w[p * n + p] -= t * apq;
    w[q * n + q] += t * apq;
    w[p * n + q] = 0.0;
    w[q * n + p] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = w[r * n + p];
        let arq = w[r * n + q];
        let np = c * arp - s * arq;
        let nq = s * arp + c * arq;
        w[r * n + p] = np;
        w[p * n + r] = np;
        w[r * n + q] = nq;
        w[q * n + r] = nq;
    }
    for r in 0..n {
        let vrp = v[r * n + p];
        let vrq = v[r * n + q];
        v[r * n + p] = c * vrp - s * vrq;
        v[r * n + q] = s * vrp + c * vrq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = RngStream::new(seed, 0);
        let b = Array2::from_shape_simple_fn((n, n), || rng.normal());
        &b + &b.t()
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn identity_is_its_own_decomposition() {
        let e = sym_eigen(Array2::<f64>::eye(3).view()).unwrap();
        assert_eq!(e.eigenvalues.to_vec(), vec![1.0, 1.0, 1.0]);
        assert_eq!(e.eigenvectors, Array2::<f64>::eye(3));
    }

    #[test]
    fn diagonal_sorted_descending() {
        let e = sym_eigen(array![[1.0, 0.0], [0.0, 3.0]].view()).unwrap();
        assert_eq!(e.eigenvalues.to_vec(), vec![3.0, 1.0]);
        assert_eq!(e.eigenvectors, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn random_six_by_six_reconstructs() {
        let a = random_symmetric(6, 42);
        let e = sym_eigen(a.view()).unwrap();
        let q = &e.eigenvectors;
        let lam = Array2::from_diag(&e.eigenvalues);
        let recon = q.dot(&lam).dot(&q.t());
        assert!(max_abs(&(&recon - &a)) <= 1e-10 * max_abs(&a));
        let orth = q.t().dot(q) - Array2::<f64>::eye(6);
        assert!(max_abs(&orth) <= 1e-12);
        for k in 0..5 {
            assert!(e.eigenvalues[k] >= e.eigenvalues[k + 1]);
        }
    }

    #[test]
    fn sign_convention_holds() {
        let a = random_symmetric(9, 3);
        let e = sym_eigen(a.view()).unwrap();
        for col in e.eigenvectors.columns() {
            let lead = col
                .iter()
                .copied()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(lead >= 0.0);
        }
    }

    #[test]
    fn rejects_non_symmetric_input() {
        let err = sym_eigen(array![[1.0, 2.0], [0.0, 1.0]].view()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let a = random_symmetric(12, 9);
        let e1 = sym_eigen(a.view()).unwrap();
        let e2 = sym_eigen(a.view()).unwrap();
        assert!(e1
            .eigenvectors
            .iter()
            .zip(e2.eigenvectors.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    proptest! {
        #[test]
        fn trace_equals_eigenvalue_sum(n in 1usize..12, seed in any::<u64>()) {
            let a = random_symmetric(n, seed);
            let e = sym_eigen(a.view()).unwrap();
            let tr = a.diag().sum();
            let s = e.eigenvalues.sum();
            prop_assert!((tr - s).abs() <= 1e-10 * max_abs(&a).max(1.0) * n as f64);
        }
    }
}
