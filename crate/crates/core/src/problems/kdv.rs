use ndarray::ArrayView1;

use super::kl::{kl_1d, KlExpansion};
use super::{check_dim, Qoi};
use crate::error::Result;
use crate::numerics::adaptive_simpson;

const QUAD_TOL: f64 = 1e-10;

/// Soliton of the stochastically forced KdV equation at `x = 6, t = 1`:
/// `σ Σ A_i ξ_i − 2 sech²(2 + 6σ Σ B_i ξ_i)`.
#[derive(Clone, Debug)]
pub struct Kdv {
    pub sigma: f64,
    pub kl: KlExpansion,
    /// `√λ_i ∫₀¹ φ_i`.
    pub a: Vec<f64>,
    /// `√λ_i ∫₀¹ ∫₀^z φ_i = √λ_i ∫₀¹ (1 − y) φ_i(y) dy`.
    pub b: Vec<f64>,
}

impl Kdv {
    pub fn new(d: usize, sigma: f64, correlation_length: f64) -> Result<Self> {
        let kl = kl_1d(correlation_length, d, 1.0)?;
        let mut a = Vec::with_capacity(d);
        let mut b = Vec::with_capacity(d);
        for i in 0..d {
            let s = kl.eigenvalues[i].sqrt();
            let pieces = 8 + (kl.modes[i].omega / 4.0) as usize;
            a.push(s * adaptive_simpson(|y| kl.eigenfunction(i, y), 0.0, 1.0, QUAD_TOL, pieces)?);
            b.push(
                s * adaptive_simpson(
                    |y| (1.0 - y) * kl.eigenfunction(i, y),
                    0.0,
                    1.0,
                    QUAD_TOL,
                    pieces,
                )?,
            );
        }
        Ok(Self { sigma, kl, a, b })
    }

    /// `(Σ A_i ξ_i, Σ B_i ξ_i)`.
    pub fn components(&self, xi: ArrayView1<f64>) -> Result<(f64, f64)> {
        check_dim(self.a.len(), xi.len())?;
        let sa = self.a.iter().zip(xi).map(|(a, x)| a * x).sum();
        let sb = self.b.iter().zip(xi).map(|(b, x)| b * x).sum();
        Ok((sa, sb))
    }

    /// The sech² contribution, always within `[−2, 0]`.
    pub fn soliton_term(&self, sb: f64) -> f64 {
        let ch = (2.0 + 6.0 * self.sigma * sb).cosh();
        -2.0 / (ch * ch)
    }
}

impl Qoi for Kdv {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn eval(&self, xi: ArrayView1<f64>) -> Result<f64> {
        let (sa, sb) = self.components(xi)?;
        Ok(self.sigma * sa + self.soliton_term(sb))
    }
}
