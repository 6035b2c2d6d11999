use ndarray::{Array1, Array2, ArrayView1};

use super::kl::{kl_2d, Kl2d};
use super::{check_dim, Qoi};
use crate::error::{Error, Result};
use crate::numerics::{solve_sym_sparse, CsrMatrix};

pub const WIDTH: f64 = 2000.0;
pub const HEIGHT: f64 = 1000.0;
pub const HEAD_SOUTH: f64 = 0.0;
pub const HEAD_NORTH: f64 = 10.0;
pub const PROBE: (f64, f64) = (200.0, 500.0);
pub const LOG_MEAN: f64 = 2.0;

/// Steady confined-aquifer flow `∇·(T ∇u) = 0` on `[0, 2000] × [0, 1000]`
/// with fixed heads on the south and north edges and no flow east and west.
/// The QoI is the head at `(200, 500)` for `T = exp(S)`, `S` a Gaussian field
/// with mean 2 given by a truncated KL expansion.
#[derive(Clone, Debug)]
pub struct Groundwater {
    pub nx: usize,
    pub ny: usize,
    pub kl: Kl2d,
    /// `√λ_k φ_k` at each cell centre, `(nx·ny) × d`.
    field: Array2<f64>,
}

impl Groundwater {
    pub fn new(d: usize, lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!("grid {nx}x{ny} is too small")));
        }
        let kl = kl_2d(lx, ly, WIDTH, HEIGHT, d)?;
        let (dx, dy) = (WIDTH / nx as f64, HEIGHT / ny as f64);
        let mut field = Array2::zeros((nx * ny, d));
        for j in 0..ny {
            let y = (j as f64 + 0.5) * dy;
            for i in 0..nx {
                let x = (i as f64 + 0.5) * dx;
                for k in 0..d {
                    field[[j * nx + i, k]] = kl.eigenvalues[k].sqrt() * kl.eigenfunction(k, x, y);
                }
            }
        }
        Ok(Self { nx, ny, kl, field })
    }

    /// `S` at every cell centre, row-major in `x`.
    pub fn log_field(&self, xi: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self.field.ncols(), xi.len())?;
        Ok(self.field.dot(&xi) + LOG_MEAN)
    }

    /// Cell-centred heads for a given transmissivity per cell.
    pub fn solve_heads(&self, t: &[f64]) -> Result<Array1<f64>> {
        let (nx, ny) = (self.nx, self.ny);
        check_dim(nx * ny, t.len())?;
        if let Some(bad) = t.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::numerical(format!(
                "non-positive transmissivity {bad}"
            )));
        }
        let (dx, dy) = (WIDTH / nx as f64, HEIGHT / ny as f64);
        let (gx, gy) = (dy / dx, dx / dy);
        let harmonic = |a: f64, b: f64| 2.0 * a * b / (a + b);
        let mut trip = Vec::with_capacity(5 * nx * ny);
        let mut rhs = Array1::zeros(nx * ny);
        let mut couple = |p: usize, q: usize, w: f64| {
            trip.push((p, p, w));
            trip.push((q, q, w));
            trip.push((p, q, -w));
            trip.push((q, p, -w));
        };
        for j in 0..ny {
            for i in 0..nx {
                let p = j * nx + i;
                if i + 1 < nx {
                    couple(p, p + 1, gx * harmonic(t[p], t[p + 1]));
                }
                if j + 1 < ny {
                    couple(p, p + nx, gy * harmonic(t[p], t[p + nx]));
                }
            }
        }
        for i in 0..nx {
            let s = i;
            let n = (ny - 1) * nx + i;
            let ws = 2.0 * gy * t[s];
            let wn = 2.0 * gy * t[n];
            trip.push((s, s, ws));
            trip.push((n, n, wn));
            rhs[s] += ws * HEAD_SOUTH;
            rhs[n] += wn * HEAD_NORTH;
        }
        let a = CsrMatrix::from_triplets(nx * ny, trip)?;
        solve_sym_sparse(&a, rhs.view())
    }

    /// Bilinear interpolation of cell-centred heads; between the outer rows
    /// and the south/north edges the fixed boundary heads are used.
    pub fn head_at(&self, heads: ArrayView1<f64>, x: f64, y: f64) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let (dx, dy) = (WIDTH / nx as f64, HEIGHT / ny as f64);
        let fx = (x / dx - 0.5).clamp(0.0, (nx - 1) as f64);
        let i0 = (fx.floor() as usize).min(nx - 2);
        let tx = fx - i0 as f64;
        let row = |j: usize| (1.0 - tx) * heads[j * nx + i0] + tx * heads[j * nx + i0 + 1];
        let fy = (y / dy - 0.5).clamp(-0.5, ny as f64 - 0.5);
        let top = (ny - 1) as f64;
        if fy < 0.0 {
            let w = 2.0 * (fy + 0.5);
            (1.0 - w) * HEAD_SOUTH + w * row(0)
        } else if fy > top {
            let w = 2.0 * (fy - top);
            (1.0 - w) * row(ny - 1) + w * HEAD_NORTH
        } else {
            let j0 = (fy.floor() as usize).min(ny - 2);
            let w = fy - j0 as f64;
            (1.0 - w) * row(j0) + w * row(j0 + 1)
        }
    }

    pub fn head_with_transmissivity(&self, t: &[f64]) -> Result<f64> {
        let heads = self.solve_heads(t)?;
        Ok(self.head_at(heads.view(), PROBE.0, PROBE.1))
    }
}

impl Qoi for Groundwater {
    fn dim(&self) -> usize {
        self.field.ncols()
    }

    fn eval(&self, xi: ArrayView1<f64>) -> Result<f64> {
        let t: Vec<f64> = self.log_field(xi)?.iter().map(|s| s.exp()).collect();
        self.head_with_transmissivity(&t)
    }
}
