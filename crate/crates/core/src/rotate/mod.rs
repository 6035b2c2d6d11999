//! Rotated sparse surrogates: the plain ℓ1 fit, the alternating direction
//! method with identity, SIR or user-supplied initial rotation, SIR-reduced
//! fits, and reduction from the gradient matrix of a pilot model.

mod model;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::hermite::{enumerate_basis, measurement_matrix, BasisMode, KernelSet, MultiIndexBasis};
use crate::numerics::{row_orthonormality_error, sym_eigen, RngStream};
use crate::sir::{default_slices, reduce, sir_fit};
use crate::sparse_recovery::{
    cross_validate_with, default_candidates, reconstruction_rows, solve_bpdn, solve_reweighted,
    BpdnProblem, CvOptions, RecoveryResult, SolverOptions,
};

pub use model::{IterationRecord, SurrogateModel, MODEL_FORMAT, MODEL_VERSION};

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub reweighted: bool,
    /// Weighted passes after the unweighted one.
    pub reweight_iters: usize,
    pub delta: Option<f64>,
    pub cv: CvOptions,
    /// Candidate tolerances for the full system; default is six log-spaced
    /// values over `[1e-4, 1] · ‖u‖₂`.
    pub candidates: Option<Vec<f64>>,
    /// Fixed tolerance; disables cross-validation entirely.
    pub epsilon: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            reweighted: false,
            reweight_iters: 2,
            delta: None,
            cv: CvOptions::default(),
            candidates: None,
            epsilon: None,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdmOptions {
    /// Stopping threshold on `|Σ|U_ij| − d|`; default depends on `d`.
    pub theta: Option<f64>,
    pub max_rotations: usize,
    /// Number of tolerances tried per rotation on `[ε/5, ε]`.
    pub eps_grid_per_iter: usize,
    /// SIR slice count; default from the sample size.
    pub slices: Option<usize>,
    pub fit: FitOptions,
}

impl Default for AdmOptions {
    fn default() -> Self {
        Self {
            theta: None,
            max_rotations: 9,
            eps_grid_per_iter: 3,
            slices: None,
            fit: FitOptions::default(),
        }
    }
}

/// `0.25 d` up to `d = 30`, `0.65 d` beyond.
pub fn default_theta(d: usize) -> f64 {
    if d <= 30 {
        0.25 * d as f64
    } else {
        0.65 * d as f64
    }
}

/// Initial rotation for [`fit_adm`].
#[derive(Clone, Debug)]
pub enum AdmInit {
    /// Warm start with an unrotated ℓ1 fit.
    Identity,
    /// SIR directions with `d̃ = d`.
    Sir,
    /// An orthogonal matrix used as the first `A`.
    Given(Array2<f64>),
}

/// `G_ij = cᵀ K_ij c`.
pub fn gradient_matrix(coeffs: ArrayView1<f64>, kernels: &KernelSet) -> Result<Array2<f64>> {
    kernels.gradient_matrix(coeffs)
}

/// Entrywise `|Σ|U_ij| − d|`; zero for any signed permutation.
pub fn rotation_distance(u: ArrayView2<f64>) -> f64 {
    (u.iter().map(|x| x.abs()).sum::<f64>() - u.nrows() as f64).abs()
}

/// Tolerances tried at each rotation.
pub fn iteration_grid(epsilon: f64, count: usize) -> Vec<f64> {
    match count {
        0 | 1 => vec![epsilon],
        3 => vec![epsilon / 5.0, epsilon / 2.0, epsilon],
        n => (0..n)
            .map(|k| epsilon / 5.0 * 5f64.powf(k as f64 / (n - 1) as f64))
            .collect(),
    }
}

fn check_training(samples: ArrayView2<f64>, outputs: ArrayView1<f64>) -> Result<()> {
    if samples.nrows() != outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.nrows(),
            found: outputs.len(),
        });
    }
    if samples.nrows() < 2 {
        return Err(Error::invalid("need at least two training samples"));
    }
    if samples.iter().chain(outputs.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    Ok(())
}

struct Solved {
    coeffs: Array1<f64>,
    epsilon: f64,
    residual: f64,
    validation: Option<f64>,
}

fn recover(
    psi: ArrayView2<f64>,
    u: ArrayView1<f64>,
    eps: f64,
    opts: &FitOptions,
) -> Result<RecoveryResult> {
    if opts.reweighted {
        solve_reweighted(psi, u, eps, opts.reweight_iters, opts.delta, &opts.solver)
    } else {
        solve_bpdn(&BpdnProblem::new(psi, u, eps), &opts.solver)
    }
}

fn least_squares_residual(
    psi: ArrayView2<f64>,
    u: ArrayView1<f64>,
    solver: &SolverOptions,
) -> Result<f64> {
    match solve_bpdn(&BpdnProblem::new(psi, u, 0.0), solver) {
        Ok(r) => Ok(r.residual_norm),
        Err(Error::Infeasible { min_residual, .. }) => Ok(min_residual),
        Err(e) => Err(e),
    }
}

/// Cross-validates over `grid` (full-system tolerances), re-bracketing upward
/// once if every candidate is infeasible, then solves on all rows.
fn solve_with_cv(
    psi: ArrayView2<f64>,
    u: ArrayView1<f64>,
    grid: &[f64],
    opts: &FitOptions,
    rng: &mut RngStream,
) -> Result<Solved> {
    let (epsilon, validation) = match opts.epsilon {
        Some(e) => (e, None),
        None => {
            let m = psi.nrows();
            let scale = (reconstruction_rows(m, opts.cv.split_fraction)? as f64 / m as f64).sqrt();
            let solve = |p: ArrayView2<f64>, v: ArrayView1<f64>, e: f64| recover(p, v, e, opts);
            let scaled: Vec<f64> = grid.iter().map(|g| g * scale).collect();
            let outcome = match cross_validate_with(psi, u, &scaled, &opts.cv, rng, solve) {
                Err(Error::Selection) => {
                    let floor = least_squares_residual(psi, u, &opts.solver)?;
                    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
                    let factor = if lo > 0.0 {
                        (1.5 * floor / lo).max(2.0)
                    } else {
                        2.0
                    };
                    let lifted: Vec<f64> = grid
                        .iter()
                        .map(|g| {
                            if lo > 0.0 {
                                g * factor * scale
                            } else {
                                g * scale + 1.5 * floor
                            }
                        })
                        .collect();
                    cross_validate_with(psi, u, &lifted, &opts.cv, rng, solve)?
                }
                other => other?,
            };
            (
                outcome.epsilon,
                outcome
                    .validation
                    .iter()
                    .flatten()
                    .cloned()
                    .reduce(f64::min),
            )
        }
    };
    let result = match recover(psi, u, epsilon, opts) {
        Err(Error::Infeasible { min_residual, .. }) => {
            recover(psi, u, min_residual * (1.0 + 1e-3), opts)?
        }
        other => other?,
    };
    Ok(Solved {
        epsilon,
        residual: result.residual_norm,
        coeffs: result.coeffs,
        validation,
    })
}

fn record(iteration: usize, solved: &Solved, distance: Option<f64>) -> IterationRecord {
    IterationRecord {
        iteration,
        epsilon: Some(solved.epsilon),
        distance,
        residual: Some(solved.residual),
        validation: solved.validation,
        error: None,
    }
}

fn failure(iteration: usize, distance: Option<f64>, err: &Error) -> IterationRecord {
    IterationRecord {
        iteration,
        epsilon: None,
        distance,
        residual: None,
        validation: None,
        error: Some(err.to_string()),
    }
}

/// Unrotated sparse fit (optionally re-weighted) with cross-validated `ε`.
pub fn fit_l1(
    samples: ArrayView2<f64>,
    outputs: ArrayView1<f64>,
    basis: &MultiIndexBasis,
    opts: &FitOptions,
    rng: &mut RngStream,
) -> Result<SurrogateModel> {
    check_training(samples, outputs)?;
    let psi = measurement_matrix(basis, samples)?;
    let grid = opts
        .candidates
        .clone()
        .unwrap_or_else(|| default_candidates(outputs));
    let solved = solve_with_cv(psi.view(), outputs, &grid, opts, rng)?;
    let mut model = SurrogateModel::new(basis.clone(), solved.coeffs.clone())?;
    model.history.push(record(0, &solved, None));
    Ok(model)
}

struct Iterate {
    coeffs: Array1<f64>,
    rotation: Array2<f64>,
    score: f64,
}

/// Alternating direction method.
///
/// Each rotation builds `G` from the current coefficients, rotates the
/// samples by its eigenvectors `U` (`η ← Uᵀη`, `A ← UᵀA`), and re-solves.
/// Iteration stops once `|Σ|U_ij| − d| < θ`. If that never happens the
/// iterate with the smallest validation residual is returned and the model
/// is flagged non-converged.
pub fn fit_adm(
    samples: ArrayView2<f64>,
    outputs: ArrayView1<f64>,
    basis: &MultiIndexBasis,
    opts: &AdmOptions,
    init: AdmInit,
    rng: &mut RngStream,
) -> Result<SurrogateModel> {
    check_training(samples, outputs)?;
    let d = basis.dim();
    if samples.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: samples.ncols(),
        });
    }
    if opts.max_rotations == 0 {
        return Err(Error::invalid("max_rotations must be at least 1"));
    }
    let theta = opts.theta.unwrap_or_else(|| default_theta(d));
    if !(theta > 0.0) {
        return Err(Error::invalid(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let kernels = KernelSet::new(basis);
    let fit = &opts.fit;
    let base_grid = fit
        .candidates
        .clone()
        .unwrap_or_else(|| default_candidates(outputs));
    let mut history = Vec::new();

    // first pass: warm start (identity) or an initial rotation
    let (mut rotation, first_distance) = match init {
        AdmInit::Identity => (Array2::eye(d), None),
        AdmInit::Sir => {
            let h = opts
                .slices
                .unwrap_or_else(|| default_slices(samples.nrows()));
            let sir = sir_fit(samples, outputs, h)?;
            let a = reduce(&sir, d)?;
            let dist = rotation_distance(a.t());
            (a, Some(dist))
        }
        AdmInit::Given(a) => {
            if a.dim() != (d, d) || row_orthonormality_error(a.view()) > 1e-10 {
                return Err(Error::invalid(
                    "initial rotation must be a d x d orthogonal matrix",
                ));
            }
            let dist = rotation_distance(a.t());
            (a, Some(dist))
        }
    };
    let mut eta = samples.dot(&rotation.t());
    let psi = measurement_matrix(basis, eta.view())?;
    let first = solve_with_cv(psi.view(), outputs, &base_grid, fit, rng)?;
    let mut epsilon = first.epsilon;
    history.push(record(0, &first, first_distance));
    let mut coeffs = first.coeffs;
    let mut best = Iterate {
        coeffs: coeffs.clone(),
        rotation: rotation.clone(),
        score: first.validation.unwrap_or(first.residual),
    };
    let mut converged = first_distance.is_some_and(|dist| dist < theta);
    let rotations_left = if first_distance.is_some() {
        opts.max_rotations - 1
    } else {
        opts.max_rotations
    };

    if !converged {
        for l in 1..=rotations_left {
            let g = gradient_matrix(coeffs.view(), &kernels)?;
            let u = sym_eigen(g.view())?.eigenvectors;
            let dist = rotation_distance(u.view());
            let eta_next = eta.dot(&u);
            let rot_next = u.t().dot(&rotation);
            let psi = measurement_matrix(basis, eta_next.view())?;
            let grid = iteration_grid(epsilon, opts.eps_grid_per_iter);
            match solve_with_cv(psi.view(), outputs, &grid, fit, rng) {
                Ok(solved) => {
                    history.push(record(l, &solved, Some(dist)));
                    eta = eta_next;
                    rotation = rot_next;
                    coeffs = solved.coeffs;
                    epsilon = solved.epsilon;
                    let score = solved.validation.unwrap_or(solved.residual);
                    if dist < theta {
                        converged = true;
                        break;
                    }
                    if score < best.score {
                        best = Iterate {
                            coeffs: coeffs.clone(),
                            rotation: rotation.clone(),
                            score,
                        };
                    }
                }
                Err(e) => {
                    history.push(failure(l, Some(dist), &e));
                    break;
                }
            }
        }
    }
    let (coeffs, rotation) = if converged {
        (coeffs, rotation)
    } else {
        (best.coeffs, best.rotation)
    };
    Ok(SurrogateModel {
        basis: basis.clone(),
        coeffs,
        reduction: None,
        rotation,
        history,
        converged,
    })
}

/// Projects inputs with a row-orthonormal `reduction` and runs identity-start
/// ADM on a full basis of order `p_reduced` in the reduced variables.
pub fn fit_reduced(
    samples: ArrayView2<f64>,
    outputs: ArrayView1<f64>,
    reduction: Array2<f64>,
    p_reduced: u32,
    opts: &AdmOptions,
    rng: &mut RngStream,
) -> Result<SurrogateModel> {
    check_training(samples, outputs)?;
    let (d_tilde, d) = reduction.dim();
    if samples.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: samples.ncols(),
        });
    }
    if d_tilde == 0 || row_orthonormality_error(reduction.view()) > 1e-10 {
        return Err(Error::invalid("reduction must have orthonormal rows"));
    }
    let basis = enumerate_basis(d_tilde, p_reduced, BasisMode::Full)?;
    let reduced = samples.dot(&reduction.t());
    let mut model = fit_adm(
        reduced.view(),
        outputs,
        &basis,
        opts,
        AdmInit::Identity,
        rng,
    )?;
    model.reduction = Some(reduction);
    Ok(model)
}

/// SIR reduction to `d̃ < d` followed by ADM in the reduced variables.
pub fn fit_sadmdr(
    samples: ArrayView2<f64>,
    outputs: ArrayView1<f64>,
    d_tilde: usize,
    p_reduced: u32,
    opts: &AdmOptions,
    rng: &mut RngStream,
) -> Result<SurrogateModel> {
    check_training(samples, outputs)?;
    let d = samples.ncols();
    if d_tilde == 0 || d_tilde >= d {
        return Err(Error::invalid(format!(
            "reduced dimension {d_tilde} must lie in 1..{d}"
        )));
    }
    let h = opts
        .slices
        .unwrap_or_else(|| default_slices(samples.nrows()));
    let sir = sir_fit(samples, outputs, h)?;
    let a_hat = reduce(&sir, d_tilde)?;
    fit_reduced(samples, outputs, a_hat, p_reduced, opts, rng)
}

#[derive(Clone, Debug)]
pub struct GradientReduction {
    /// `d̃ × d` with orthonormal rows, in the model's input variables.
    pub map: Array2<f64>,
    /// Eigenvalues of the input-space gradient matrix, descending.
    pub eigenvalues: Array1<f64>,
    /// The `d̃`-th eigenvalue is numerically zero.
    pub rank_deficient: bool,
}

/// Leading `d̃` eigenvectors of `G_ξ = Bᵀ G_η B`, where `B = A Â` maps the
/// model's inputs to its basis variables.
pub fn reduce_via_gradient(model: &SurrogateModel, d_tilde: usize) -> Result<GradientReduction> {
    let d = model.input_dim();
    if d_tilde == 0 || d_tilde > d {
        return Err(Error::invalid(format!(
            "reduced dimension {d_tilde} outside 1..={d}"
        )));
    }
    let kernels = KernelSet::new(&model.basis);
    let g_eta = gradient_matrix(model.coeffs.view(), &kernels)?;
    let b = model.input_map();
    let g = b.t().dot(&g_eta).dot(&b);
    let g = (&g + &g.t()) * 0.5;
    let eig = sym_eigen(g.view())?;
    let top = eig.eigenvalues[0].abs();
    let rank_deficient = eig.eigenvalues[d_tilde - 1] <= 1e-12 * top.max(f64::MIN_POSITIVE);
    Ok(GradientReduction {
        map: eig.eigenvectors.slice(s![.., ..d_tilde]).t().to_owned(),
        eigenvalues: eig.eigenvalues,
        rank_deficient,
    })
}

/// Gradient-based reduction of a pilot model followed by [`fit_reduced`].
pub fn fit_gradient_reduced(
    samples: ArrayView2<f64>,
    outputs: ArrayView1<f64>,
    pilot: &SurrogateModel,
    d_tilde: usize,
    p_reduced: u32,
    opts: &AdmOptions,
    rng: &mut RngStream,
) -> Result<SurrogateModel> {
    let red = reduce_via_gradient(pilot, d_tilde)?;
    fit_reduced(samples, outputs, red.map, p_reduced, opts, rng)
}

#[cfg(test)]
mod tests;
