//! Basis pursuit denoising, its weighted variant, iterative re-weighting and
//! residual-tolerance selection by cross-validation.

mod cv;
mod homotopy;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};

pub use cv::{
    cross_validate_epsilon, cross_validate_with, default_candidates, reconstruction_rows,
    CvOptions, CvOutcome,
};

/// `min ‖W c‖₁ subject to ‖Ψ c − u‖₂ ≤ ε`.
#[derive(Clone, Copy, Debug)]
pub struct BpdnProblem<'a> {
    pub psi: ArrayView2<'a, f64>,
    pub u: ArrayView1<'a, f64>,
    pub epsilon: f64,
    pub weights: Option<ArrayView1<'a, f64>>,
}

impl<'a> BpdnProblem<'a> {
    pub fn new(psi: ArrayView2<'a, f64>, u: ArrayView1<'a, f64>, epsilon: f64) -> Self {
        Self {
            psi,
            u,
            epsilon,
            weights: None,
        }
    }

    pub fn with_weights(mut self, weights: ArrayView1<'a, f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    fn validate(&self) -> Result<()> {
        let (m, n) = self.psi.dim();
        if m == 0 || n == 0 {
            return Err(Error::invalid("empty measurement matrix"));
        }
        if self.u.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: self.u.len(),
            });
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if let Some(w) = self.weights {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::invalid(
                    "weights must be strictly positive and finite",
                ));
            }
        }
        if self.psi.iter().chain(self.u.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite entry in measurement data"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Homotopy step cap; `None` means `10 (M + N)`.
    pub max_steps: Option<usize>,
    /// Relative pivot below which an entering column is treated as dependent.
    pub collinearity_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_steps: None,
            collinearity_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryResult {
    pub coeffs: Array1<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn residual_norm(psi: ArrayView2<f64>, c: ArrayView1<f64>, u: ArrayView1<f64>) -> f64 {
    let r = psi.dot(&c) - u;
    r.dot(&r).sqrt()
}

/// Solves the (weighted) BPDN problem.
///
/// Returns [`Error::Infeasible`] when `ε` is below the least-squares residual;
/// hitting the step cap yields a result with `converged = false`.
pub fn solve_bpdn(prob: &BpdnProblem, opts: &SolverOptions) -> Result<RecoveryResult> {
    prob.validate()?;
    let (m, n) = prob.psi.dim();
    let u_norm = prob.u.dot(&prob.u).sqrt();
    if prob.epsilon >= u_norm {
        return Ok(RecoveryResult {
            coeffs: Array1::zeros(n),
            residual_norm: u_norm,
            iterations: 0,
            converged: true,
        });
    }
    // z = W c, columns scaled by 1/w
    let mut cols: Array2<f64> = prob.psi.t().to_owned();
    if let Some(w) = prob.weights {
        for (mut row, &wj) in cols.rows_mut().into_iter().zip(w.iter()) {
            row /= wj;
        }
    }
    let max_steps = opts.max_steps.unwrap_or(10 * (m + n));
    let path = homotopy::trace_to_residual(
        &cols,
        prob.u,
        prob.epsilon,
        max_steps,
        opts.collinearity_tol,
    )?;
    let mut coeffs = path.coeffs;
    if let Some(w) = prob.weights {
        Zip::from(&mut coeffs).and(&w).for_each(|c, &wj| *c /= wj);
    }
    let res = residual_norm(prob.psi, coeffs.view(), prob.u);
    Ok(RecoveryResult {
        converged: path.converged && res <= prob.epsilon * (1.0 + 1e-6) + 1e-13 * u_norm,
        coeffs,
        residual_norm: res,
        iterations: path.steps,
    })
}

/// `w_i = 1 / (|c_i| + δ)`.
pub fn reweight(coeffs: ArrayView1<f64>, delta: f64) -> Array1<f64> {
    coeffs.mapv(|c| 1.0 / (c.abs() + delta))
}

/// Default re-weighting offset `1e-4 ‖c‖_∞`, floored at `1e-12`.
pub fn default_delta(coeffs: ArrayView1<f64>) -> f64 {
    let inf = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    (1e-4 * inf).max(1e-12)
}

/// One unweighted solve followed by `iters` weighted solves with
/// `w = 1/(|c| + δ)` from the previous iterate.
pub fn solve_reweighted(
    psi: ArrayView2<f64>,
    u: ArrayView1<f64>,
    epsilon: f64,
    iters: usize,
    delta: Option<f64>,
    opts: &SolverOptions,
) -> Result<RecoveryResult> {
    if iters == 0 {
        return Err(Error::invalid(
            "re-weighted solve needs at least one weighted pass",
        ));
    }
    if let Some(d) = delta {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {d}")));
        }
    }
    let mut result = solve_bpdn(&BpdnProblem::new(psi, u, epsilon), opts)?;
    let delta = delta.unwrap_or_else(|| default_delta(result.coeffs.view()));
    let mut total = result.iterations;
    for _ in 0..iters {
        let w = reweight(result.coeffs.view(), delta);
        result = solve_bpdn(
            &BpdnProblem::new(psi, u, epsilon).with_weights(w.view()),
            opts,
        )?;
        total += result.iterations;
    }
    result.iterations = total;
    Ok(result)
}
