use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{solve_bpdn, BpdnProblem, RecoveryResult, SolverOptions};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

#[derive(Clone, Debug)]
pub struct CvOptions {
    /// Fraction of rows used for reconstruction.
    pub split_fraction: f64,
    /// Independent random splits averaged per candidate; 1 is a single split.
    pub repeats: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            split_fraction: 0.8,
            repeats: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome {
    /// Tolerance for the full system, `√(M/M_r) ε_r`.
    pub epsilon: f64,
    /// Winning reconstruction-set tolerance.
    pub epsilon_r: f64,
    /// Validation residual per candidate; `None` where every split was infeasible.
    pub validation: Vec<Option<f64>>,
    pub reconstruction_rows: usize,
}

/// Six log-spaced values spanning `[1e-4, 1] · ‖u‖₂`.
pub fn default_candidates(u: ArrayView1<f64>) -> Vec<f64> {
    let norm = u.dot(&u).sqrt();
    (0..6)
        .map(|k| norm * 10f64.powf(-4.0 + 0.8 * k as f64))
        .collect()
}

/// Rows kept for reconstruction out of `m`: `round(fraction · m)`, clamped
/// so both sides of the split are non-empty.
pub fn reconstruction_rows(m: usize, fraction: f64) -> Result<usize> {
    if m < 2 {
        return Err(Error::invalid("cross-validation needs at least two rows"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    Ok(((fraction * m as f64).round() as usize).clamp(1, m - 1))
}

fn split_rows(m: usize, m_r: usize, rng: &mut RngStream) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..m).collect();
    rng.shuffle(&mut rows);
    let val = rows.split_off(m_r);
    (rows, val)
}

/// Cross-validated choice of `ε` with plain BPDN.
pub fn cross_validate_epsilon(
    psi: ArrayView2<f64>,
    u: ArrayView1<f64>,
    candidates: &[f64],
    split_fraction: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    let opts = CvOptions {
        split_fraction,
        repeats: 1,
    };
    let solver = SolverOptions::default();
    cross_validate_with(psi, u, candidates, &opts, rng, |p, v, e| {
        solve_bpdn(&BpdnProblem::new(p, v, e), &solver)
    })
    .map(|o| o.epsilon)
}

/// Cross-validation with a caller-supplied recovery routine.
///
/// Each candidate is a tolerance for the reconstruction rows. Candidates the
/// solver reports as infeasible are skipped; if all are, the result is
/// [`Error::Selection`].
pub fn cross_validate_with<F>(
    psi: ArrayView2<f64>,
    u: ArrayView1<f64>,
    candidates: &[f64],
    opts: &CvOptions,
    rng: &mut RngStream,
    solve: F,
) -> Result<CvOutcome>
where
    F: Fn(ArrayView2<f64>, ArrayView1<f64>, f64) -> Result<RecoveryResult>,
{
    let m = psi.nrows();
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate tolerances"));
    }
    if opts.repeats == 0 {
        return Err(Error::invalid("cross-validation needs at least one split"));
    }
    if u.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: u.len(),
        });
    }
    let m_r = reconstruction_rows(m, opts.split_fraction)?;
    if let Some(c) = candidates.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
        return Err(Error::invalid(format!("bad candidate tolerance {c}")));
    }

    let mut sums = vec![0.0; candidates.len()];
    let mut counts = vec![0usize; candidates.len()];
    for _ in 0..opts.repeats {
        let (rec, val) = split_rows(m, m_r, rng);
        let psi_r: Array2<f64> = psi.select(Axis(0), &rec);
        let u_r: Array1<f64> = u.select(Axis(0), &rec);
        let psi_v: Array2<f64> = psi.select(Axis(0), &val);
        let u_v: Array1<f64> = u.select(Axis(0), &val);
        for (k, &eps) in candidates.iter().enumerate() {
            match solve(psi_r.view(), u_r.view(), eps) {
                Ok(res) => {
                    let r = psi_v.dot(&res.coeffs) - &u_v;
                    sums[k] += r.dot(&r).sqrt();
                    counts[k] += 1;
                }
                Err(Error::Infeasible { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let validation: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c == opts.repeats).then(|| s / c as f64))
        .collect();
    let best = validation
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::Selection)?;
    let epsilon_r = candidates[best.0];
    Ok(CvOutcome {
        epsilon: (m as f64 / m_r as f64).sqrt() * epsilon_r,
        epsilon_r,
        validation,
        reconstruction_rows: m_r,
    })
}
