//! Benchmark quantities of interest with standard-normal inputs.

mod groundwater;
mod kdv;
mod kl;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{enumerate_basis, BasisMode, MultiIndexBasis};
use crate::numerics::RngStream;

pub use groundwater::Groundwater;
pub use kdv::Kdv;
pub use kl::{grid_capture, kl_1d, kl_2d, kl_grid, GridKl, Kl2d, KlExpansion, KlMode, Parity};

/// A scalar quantity of interest `u(ξ)`, `ξ ~ N(0, I_d)`.
pub trait Qoi: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, xi: ArrayView1<f64>) -> Result<f64>;

    /// Closed-form `(mean, standard deviation)` where one exists.
    fn exact_moments(&self) -> Option<(f64, f64)> {
        None
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Evaluates `q` at every row of `points`, in parallel when enabled.
pub fn evaluate_rows(q: &dyn Qoi, points: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_dim(q.dim(), points.ncols())?;
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        (0..points.nrows())
            .into_par_iter()
            .map(|r| q.eval(points.row(r)))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|r| q.eval(r))
        .collect::<Result<_>>()?;
    Ok(Array1::from(values))
}

/// `s + 0.25 s² + 0.025 s³` with `s = Σ ξ_i`.
#[derive(Clone, Debug)]
pub struct Ridge {
    pub d: usize,
}

pub fn ridge_eval(xi: ArrayView1<f64>) -> f64 {
    let s = xi.sum();
    s + 0.25 * s * s + 0.025 * s * s * s
}

/// The ridge function in the rotated variable `η₁ = Σ ξ_i / √d`.
pub fn ridge_reduced(eta1: f64, d: usize) -> f64 {
    let d = d as f64;
    d.sqrt() * eta1 + 0.25 * d * eta1 * eta1 + 0.025 * d.powf(1.5) * eta1.powi(3)
}

impl Qoi for Ridge {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, xi: ArrayView1<f64>) -> Result<f64> {
        check_dim(self.d, xi.len())?;
        Ok(ridge_eval(xi))
    }

    fn exact_moments(&self) -> Option<(f64, f64)> {
        // Hermite coefficients in η₁: a ψ₁ + b √2 ψ₂ + c √6 ψ₃ after z² = He₂ + 1, z³ = He₃ + 3z
        let d = self.d as f64;
        let lin = d.sqrt() + 0.075 * d.powf(1.5);
        let quad = 0.25 * d;
        let cubic = 0.025 * d.powf(1.5);
        let var = lin * lin + 2.0 * quad * quad + 6.0 * cubic * cubic;
        Some((quad, var.sqrt()))
    }
}

/// `Σ c_n ψ_n(ξ)` with `c_n = ζ_n / n^{1.5}`, `ζ_n ~ U[−1, 1]`, `n` counted from one.
#[derive(Clone, Debug)]
pub struct Compressible {
    pub basis: MultiIndexBasis,
    pub coeffs: Array1<f64>,
}

pub fn compressible_make(d: usize, order: u32, rng: &mut RngStream) -> Result<Compressible> {
    let basis = enumerate_basis(d, order, BasisMode::Full)?;
    let coeffs = Array1::from_iter(
        (1..=basis.len()).map(|n| rng.uniform_range(-1.0, 1.0) / (n as f64).powf(1.5)),
    );
    Ok(Compressible { basis, coeffs })
}

impl Qoi for Compressible {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn eval(&self, xi: ArrayView1<f64>) -> Result<f64> {
        check_dim(self.basis.dim(), xi.len())?;
        Ok(self
            .basis
            .eval_point(xi)
            .iter()
            .zip(&self.coeffs)
            .map(|(p, c)| p * c)
            .sum())
    }

    fn exact_moments(&self) -> Option<(f64, f64)> {
        let var: f64 = self.coeffs.iter().skip(1).map(|c| c * c).sum();
        Some((self.coeffs[0], var.sqrt()))
    }
}

/// `exp(2 − Σ sin(i) ξ_i / i)`.
#[derive(Clone, Debug)]
pub struct Highdim {
    pub weights: Vec<f64>,
}

impl Highdim {
    pub fn new(d: usize) -> Self {
        Self {
            weights: (1..=d).map(|i| (i as f64).sin() / i as f64).collect(),
        }
    }
}

pub fn highdim_eval(xi: ArrayView1<f64>) -> f64 {
    let s: f64 = xi
        .iter()
        .enumerate()
        .map(|(k, x)| ((k + 1) as f64).sin() * x / (k + 1) as f64)
        .sum();
    (2.0 - s).exp()
}

impl Qoi for Highdim {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn eval(&self, xi: ArrayView1<f64>) -> Result<f64> {
        check_dim(self.weights.len(), xi.len())?;
        let s: f64 = self.weights.iter().zip(xi).map(|(w, x)| w * x).sum();
        Ok((2.0 - s).exp())
    }

    fn exact_moments(&self) -> Option<(f64, f64)> {
        // log-normal with log-mean 2 and log-variance Σ w_i²
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        let mean = (2.0 + 0.5 * s2).exp();
        Some((mean, mean * s2.exp_m1().sqrt()))
    }
}

fn d_ridge() -> usize {
    12
}
fn d_compressible() -> usize {
    20
}
fn order_compressible() -> u32 {
    3
}
fn d_kdv() -> usize {
    100
}
fn sigma_kdv() -> f64 {
    0.4
}
fn lc_kdv() -> f64 {
    0.1
}
fn d_groundwater() -> usize {
    100
}
fn l_groundwater() -> f64 {
    300.0
}
fn nx_groundwater() -> usize {
    61
}
fn ny_groundwater() -> usize {
    31
}
fn d_highdim() -> usize {
    500
}

/// Serializable description of a benchmark; `name` selects the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    Ridge {
        #[serde(default = "d_ridge")]
        d: usize,
    },
    Compressible {
        #[serde(default = "d_compressible")]
        d: usize,
        #[serde(default = "order_compressible")]
        order: u32,
        /// Pins one coefficient draw across replicates.
        #[serde(default)]
        coefficient_seed: Option<u64>,
    },
    Kdv {
        #[serde(default = "d_kdv")]
        d: usize,
        #[serde(default = "sigma_kdv")]
        sigma: f64,
        #[serde(default = "lc_kdv")]
        correlation_length: f64,
    },
    Groundwater {
        #[serde(default = "d_groundwater")]
        d: usize,
        #[serde(default = "l_groundwater")]
        lx: f64,
        #[serde(default = "l_groundwater")]
        ly: f64,
        #[serde(default = "nx_groundwater")]
        nx: usize,
        #[serde(default = "ny_groundwater")]
        ny: usize,
    },
    Highdim {
        #[serde(default = "d_highdim")]
        d: usize,
    },
}

/// A constructed benchmark.
#[derive(Clone, Debug)]
pub enum Problem {
    Ridge(Ridge),
    Compressible(Compressible),
    Kdv(Kdv),
    Groundwater(Groundwater),
    Highdim(Highdim),
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ridge { .. } => "ridge",
            Self::Compressible { .. } => "compressible",
            Self::Kdv { .. } => "kdv",
            Self::Groundwater { .. } => "groundwater",
            Self::Highdim { .. } => "highdim",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::Ridge { d }
            | Self::Compressible { d, .. }
            | Self::Kdv { d, .. }
            | Self::Groundwater { d, .. }
            | Self::Highdim { d } => d,
        }
    }

    /// Built-in defaults for a problem name.
    pub fn default_for(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::json!({ "name": name }))
            .map_err(|_| Error::Config(format!("unknown problem '{name}'")))
    }

    pub fn all_defaults() -> Vec<Self> {
        ["ridge", "compressible", "kdv", "groundwater", "highdim"]
            .iter()
            .map(|n| Self::default_for(n).expect("built-in problem"))
            .collect()
    }

    pub fn description(&self) -> &'static str {
        match self {
            Self::Ridge { .. } => "s + 0.25 s^2 + 0.025 s^3 with s the sum of the inputs",
            Self::Compressible { .. } => {
                "random Hermite expansion with coefficients decaying as n^-1.5"
            }
            Self::Kdv { .. } => {
                "KdV soliton with KL-expanded additive forcing, observed at x=6, t=1"
            }
            Self::Groundwater { .. } => {
                "hydraulic head at (200, 500) for a log-normal transmissivity field"
            }
            Self::Highdim { .. } => "exp(2 - sum sin(i) xi_i / i)",
        }
    }

    /// Whether the truth changes between replicates.
    pub fn varies_per_replicate(&self) -> bool {
        matches!(
            self,
            Self::Compressible {
                coefficient_seed: None,
                ..
            }
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::Config("problem dimension must be positive".into()));
        }
        match *self {
            Self::Kdv {
                sigma,
                correlation_length,
                ..
            } if !(sigma.is_finite() && correlation_length > 0.0) => Err(Error::Config(
                "kdv needs finite sigma and positive correlation_length".into(),
            )),
            Self::Groundwater { lx, ly, nx, ny, .. }
                if !(lx > 0.0 && ly > 0.0 && nx >= 2 && ny >= 2) =>
            {
                Err(Error::Config(
                    "groundwater needs positive lengths and at least a 2x2 grid".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Builds the problem; `rng` is only consumed by unpinned compressible draws.
    pub fn build(&self, rng: &mut RngStream) -> Result<Problem> {
        self.validate()?;
        Ok(match *self {
            Self::Ridge { d } => Problem::Ridge(Ridge { d }),
            Self::Compressible {
                d,
                order,
                coefficient_seed,
            } => {
                let c = match coefficient_seed {
                    Some(seed) => compressible_make(d, order, &mut RngStream::new(seed, 0))?,
                    None => compressible_make(d, order, rng)?,
                };
                Problem::Compressible(c)
            }
            Self::Kdv {
                d,
                sigma,
                correlation_length,
            } => Problem::Kdv(Kdv::new(d, sigma, correlation_length)?),
            Self::Groundwater { d, lx, ly, nx, ny } => {
                Problem::Groundwater(Groundwater::new(d, lx, ly, nx, ny)?)
            }
            Self::Highdim { d } => Problem::Highdim(Highdim::new(d)),
        })
    }
}

impl Problem {
    fn inner(&self) -> &dyn Qoi {
        match self {
            Self::Ridge(p) => p,
            Self::Compressible(p) => p,
            Self::Kdv(p) => p,
            Self::Groundwater(p) => p,
            Self::Highdim(p) => p,
        }
    }
}

impl Qoi for Problem {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn eval(&self, xi: ArrayView1<f64>) -> Result<f64> {
        self.inner().eval(xi)
    }

    fn exact_moments(&self) -> Option<(f64, f64)> {
        self.inner().exact_moments()
    }
}
