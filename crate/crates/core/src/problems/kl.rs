use std::f64::consts::PI;

use crate::error::{Error, Result};
use ndarray::Array2;

use crate::numerics::{find_root, sym_eigen};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    /// `cos(ω (x − L/2))`
    Even,
    /// `sin(ω (x − L/2))`
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlMode {
    pub omega: f64,
    pub parity: Parity,
    /// Factor giving the eigenfunction unit L2 norm on the domain.
    pub norm: f64,
}

/// Eigenpairs of `exp(−|x − x'|/l_c)` on `[0, L]`, in descending eigenvalue order.
#[derive(Clone, Debug)]
pub struct KlExpansion {
    pub correlation_length: f64,
    pub length: f64,
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<KlMode>,
}

/// Analytic eigenpairs on `[0, length]` from the transcendental equations
/// `c cos(ωa) − ω sin(ωa) = 0` (even) and `ω cos(ωa) + c sin(ωa) = 0` (odd),
/// with `c = 1/l_c` and `a = length/2`.
pub fn kl_1d(correlation_length: f64, terms: usize, length: f64) -> Result<KlExpansion> {
    if !(correlation_length > 0.0 && correlation_length.is_finite()) {
        return Err(Error::invalid(format!(
            "correlation length must be positive, got {correlation_length}"
        )));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid(format!(
            "domain length must be positive, got {length}"
        )));
    }
    if terms == 0 {
        return Err(Error::invalid("at least one KL term is required"));
    }
    let c = 1.0 / correlation_length;
    let a = 0.5 * length;
    let even = |w: f64| c * (w * a).cos() - w * (w * a).sin();
    let odd = |w: f64| w * (w * a).cos() + c * (w * a).sin();

    let mut modes = Vec::with_capacity(terms);
    let mut eigenvalues = Vec::with_capacity(terms);
    for k in 0..terms {
        let j = (k / 2) as f64;
        let (omega, parity) = if k % 2 == 0 {
            (
                find_root(&even, j * PI / a, (j + 0.5) * PI / a)?,
                Parity::Even,
            )
        } else {
            (
                find_root(&odd, (j + 0.5) * PI / a, (j + 1.0) * PI / a)?,
                Parity::Odd,
            )
        };
        let s = (2.0 * omega * a).sin() / (2.0 * omega);
        let sq = match parity {
            Parity::Even => a + s,
            Parity::Odd => a - s,
        };
        modes.push(KlMode {
            omega,
            parity,
            norm: 1.0 / sq.sqrt(),
        });
        eigenvalues.push(2.0 * c / (omega * omega + c * c));
    }
    Ok(KlExpansion {
        correlation_length,
        length,
        eigenvalues,
        modes,
    })
}

impl KlExpansion {
    pub fn terms(&self) -> usize {
        self.modes.len()
    }

    /// Integral of the covariance diagonal, equal to the full eigenvalue sum.
    pub fn trace(&self) -> f64 {
        self.length
    }

    pub fn captured(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `φ_i(x)`.
    pub fn eigenfunction(&self, i: usize, x: f64) -> f64 {
        let m = &self.modes[i];
        let t = m.omega * (x - 0.5 * self.length);
        m.norm
            * match m.parity {
                Parity::Even => t.cos(),
                Parity::Odd => t.sin(),
            }
    }
}

/// Eigenpairs of `exp(−|x − x'|/l)` discretized on `n` cell centres of
/// `[0, L]` with midpoint weights, so the eigenvalues sum to `L` exactly.
#[derive(Clone, Debug)]
pub struct GridKl {
    pub correlation_length: f64,
    pub length: f64,
    pub nodes: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `φ_k` at the nodes, one column per mode, `Σ_i h φ_k(x_i)² = 1`,
    /// signed positive at the first node.
    pub values: Array2<f64>,
}

pub fn kl_grid(correlation_length: f64, n: usize, length: f64) -> Result<GridKl> {
    if !(correlation_length > 0.0 && length > 0.0) || n == 0 {
        return Err(Error::invalid(
            "grid KL needs positive lengths and at least one node",
        ));
    }
    let h = length / n as f64;
    let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let c = Array2::from_shape_fn((n, n), |(i, j)| {
        h * (-(nodes[i] - nodes[j]).abs() / correlation_length).exp()
    });
    let eig = sym_eigen(c.view())?;
    let mut values = eig.eigenvectors / h.sqrt();
    for mut col in values.columns_mut() {
        if col[0] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(GridKl {
        correlation_length,
        length,
        nodes,
        eigenvalues: eig.eigenvalues.to_vec(),
        values,
    })
}

/// Separable two-dimensional expansion for `exp(−|Δx|/l_x − |Δy|/l_y)` on
/// `[0, width] × [0, height]`: the largest products `λ_i^x λ_j^y` of the
/// analytic one-dimensional eigenpairs, ties broken by `(i, j)`.
#[derive(Clone, Debug)]
pub struct Kl2d {
    pub x: KlExpansion,
    pub y: KlExpansion,
    pub pairs: Vec<(usize, usize)>,
    pub eigenvalues: Vec<f64>,
}

pub fn kl_2d(lx: f64, ly: f64, width: f64, height: f64, terms: usize) -> Result<Kl2d> {
    // every product outside the first `terms` modes per axis is dominated by
    // `terms` products that include a leading mode
    let x = kl_1d(lx, terms, width)?;
    let y = kl_1d(ly, terms, height)?;
    let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(terms * terms);
    for (i, lxi) in x.eigenvalues.iter().enumerate() {
        for (j, lyj) in y.eigenvalues.iter().enumerate() {
            all.push((lxi * lyj, i, j));
        }
    }
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    all.truncate(terms);
    Ok(Kl2d {
        pairs: all.iter().map(|&(_, i, j)| (i, j)).collect(),
        eigenvalues: all.iter().map(|t| t.0).collect(),
        x,
        y,
    })
}

impl Kl2d {
    pub fn terms(&self) -> usize {
        self.pairs.len()
    }

    /// Sum of all product eigenvalues, the domain area.
    pub fn trace(&self) -> f64 {
        self.x.trace() * self.y.trace()
    }

    pub fn captured(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn eigenfunction(&self, k: usize, x: f64, y: f64) -> f64 {
        let (i, j) = self.pairs[k];
        self.x.eigenfunction(i, x) * self.y.eigenfunction(j, y)
    }
}

/// Captured fraction of the top `terms` products when both axes are
/// discretized on the given cell-centred grids.
pub fn grid_capture(
    lx: f64,
    ly: f64,
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    terms: usize,
) -> Result<f64> {
    let x = kl_grid(lx, nx, width)?;
    let y = kl_grid(ly, ny, height)?;
    let mut all: Vec<f64> = x
        .eigenvalues
        .iter()
        .flat_map(|a| y.eigenvalues.iter().map(move |b| a * b))
        .collect();
    all.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = all.iter().sum();
    Ok(all.iter().take(terms).sum::<f64>() / total)
}
