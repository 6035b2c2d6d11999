//! Exact LASSO homotopy used to locate the point on the Pareto curve
//! `λ ↦ ‖u − Ψ c_λ‖₂` whose residual equals the BPDN target `ε`.
//!
//! The path `c_λ = argmin ½‖Ψc − u‖² + λ‖c‖₁` is piecewise linear in `λ`,
//! and on each segment the squared residual is a quadratic in the step, so
//! the root of `‖r‖ = ε` is found in closed form rather than by iteration.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

pub(crate) struct PathOutcome {
    pub coeffs: Array1<f64>,
    pub steps: usize,
    pub converged: bool,
}

/// Incrementally maintained Cholesky factor of the active Gram matrix.
struct ActiveSet {
    members: Vec<usize>,
    signs: Vec<f64>,
    chol: Vec<Vec<f64>>,
}

impl ActiveSet {
    fn new() -> Self {
        Self {
            members: Vec::new(),
            signs: Vec::new(),
            chol: Vec::new(),
        }
    }

    /// Appends column `j`; returns `false` if it is numerically dependent on
    /// the current members.
    fn try_push(&mut self, cols: &Array2<f64>, j: usize, sign: f64, tol: f64) -> bool {
        let cj = cols.row(j);
        let k = self.members.len();
        let mut w = vec![0.0; k];
        for a in 0..k {
            let g = cols.row(self.members[a]).dot(&cj);
            let s: f64 = (0..a).map(|b| self.chol[a][b] * w[b]).sum();
            w[a] = (g - s) / self.chol[a][a];
        }
        let norm2 = cj.dot(&cj);
        let diag2 = norm2 - w.iter().map(|v| v * v).sum::<f64>();
        if diag2 <= tol * norm2 || !diag2.is_finite() {
            return false;
        }
        w.push(diag2.sqrt());
        self.chol.push(w);
        self.members.push(j);
        self.signs.push(sign);
        true
    }

    fn remove(&mut self, pos: usize, cols: &Array2<f64>) {
        self.members.remove(pos);
        self.signs.remove(pos);
        let members = std::mem::take(&mut self.members);
        let signs = std::mem::take(&mut self.signs);
        self.chol.clear();
        for (j, s) in members.into_iter().zip(signs) {
            // a subset of independent columns stays independent
            self.try_push(cols, j, s, 0.0);
        }
    }

    /// `(Ψ_Aᵀ Ψ_A)⁻¹ s_A`.
    fn direction(&self) -> Vec<f64> {
        let k = self.members.len();
        let mut y = vec![0.0; k];
        for i in 0..k {
            let s: f64 = (0..i).map(|b| self.chol[i][b] * y[b]).sum();
            y[i] = (self.signs[i] - s) / self.chol[i][i];
        }
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|b| self.chol[b][i] * x[b]).sum();
            x[i] = (y[i] - s) / self.chol[i][i];
        }
        x
    }
}

enum Event {
    Enter(usize, f64),
    Leave(usize),
    PathEnd,
}

/// Runs the homotopy on `cols` (one row per dictionary column, `N × M`)
/// until the residual norm reaches `epsilon`.
pub(crate) fn trace_to_residual(
    cols: &Array2<f64>,
    u: ArrayView1<f64>,
    epsilon: f64,
    max_steps: usize,
    collinearity_tol: f64,
) -> Result<PathOutcome> {
    let (n, m) = cols.dim();
    let mut z = Array1::<f64>::zeros(n);
    let mut r = u.to_owned();
    let u_norm = u.dot(&u).sqrt();
    let floor = 1e-13 * u_norm;

    let mut corr = cols.dot(&r);
    let (first, lambda0) = argmax_abs(corr.view(), |_| true);
    let mut lambda = lambda0;
    if lambda == 0.0 {
        return Ok(PathOutcome {
            coeffs: z,
            steps: 0,
            converged: u_norm <= epsilon + floor,
        });
    }
    let mut active = ActiveSet::new();
    let mut in_active = vec![false; n];
    let mut blocked = vec![false; n];
    if active.try_push(cols, first, corr[first].signum(), collinearity_tol) {
        in_active[first] = true;
    } else {
        return Err(Error::numerical("first entering column has zero norm"));
    }
    let mut just_left: Option<usize> = None;

    for step in 1..=max_steps {
        let dir = active.direction();
        let mut v = Array1::<f64>::zeros(m);
        for (&j, &dj) in active.members.iter().zip(&dir) {
            v.scaled_add(dj, &cols.row(j));
        }
        let a = cols.dot(&v);

        let mut gamma = lambda;
        let mut event = Event::PathEnd;
        for j in 0..n {
            if in_active[j] || blocked[j] || Some(j) == just_left {
                continue;
            }
            let (cj, aj) = (corr[j], a[j]);
            for (num, den, sign) in [(lambda - cj, 1.0 - aj, 1.0), (lambda + cj, 1.0 + aj, -1.0)] {
                if den > 1e-12 {
                    let g = num / den;
                    if g > 0.0 && g < gamma {
                        gamma = g;
                        event = Event::Enter(j, sign);
                    }
                }
            }
        }
        for (pos, (&j, &dj)) in active.members.iter().zip(&dir).enumerate() {
            if dj != 0.0 {
                let g = -z[j] / dj;
                if g > 0.0 && g < gamma {
                    gamma = g;
                    event = Event::Leave(pos);
                }
            }
        }

        // ‖r − γv‖² = ε² on this segment?
        let rr = r.dot(&r);
        let rv = r.dot(&v);
        let vv = v.dot(&v);
        let end_sq = rr - 2.0 * gamma * rv + gamma * gamma * vv;
        let eps_sq = epsilon * epsilon;
        if end_sq <= eps_sq && vv > 0.0 {
            let disc = (rv * rv - vv * (rr - eps_sq)).max(0.0);
            let g = ((rv - disc.sqrt()) / vv).clamp(0.0, gamma);
            for (&j, &dj) in active.members.iter().zip(&dir) {
                z[j] += g * dj;
            }
            return Ok(PathOutcome {
                coeffs: z,
                steps: step,
                converged: true,
            });
        }

        for (&j, &dj) in active.members.iter().zip(&dir) {
            z[j] += gamma * dj;
        }
        r.scaled_add(-gamma, &v);
        lambda -= gamma;
        just_left = None;

        match event {
            Event::PathEnd => {
                let res = r.dot(&r).sqrt();
                if res <= epsilon + floor {
                    return Ok(PathOutcome {
                        coeffs: z,
                        steps: step,
                        converged: true,
                    });
                }
                return Err(Error::Infeasible {
                    epsilon,
                    min_residual: res,
                });
            }
            Event::Enter(j, sign) => {
                if active.try_push(cols, j, sign, collinearity_tol) {
                    in_active[j] = true;
                } else {
                    blocked[j] = true;
                }
            }
            Event::Leave(pos) => {
                let j = active.members[pos];
                z[j] = 0.0;
                in_active[j] = false;
                active.remove(pos, cols);
                just_left = Some(j);
            }
        }
        corr = cols.dot(&r);
        if lambda <= 0.0 {
            lambda = 0.0;
        }
    }
    Ok(PathOutcome {
        coeffs: z,
        steps: max_steps,
        converged: false,
    })
}

fn argmax_abs(v: ArrayView1<f64>, keep: impl Fn(usize) -> bool) -> (usize, f64) {
    let mut best = (0usize, 0.0f64);
    for (j, x) in v.iter().enumerate() {
        if keep(j) && x.abs() > best.1 {
            best = (j, x.abs());
        }
    }
    best
}
