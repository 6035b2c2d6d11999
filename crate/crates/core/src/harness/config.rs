use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hermite::{full_basis_size, BasisMode};
use crate::problems::ProblemSpec;
use crate::rotate::{AdmOptions, FitOptions};
use crate::sparse_recovery::{CvOptions, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Sample moments of the training outputs.
    Mc,
    L1,
    ReweightedL1,
    Adm,
    Sadm,
    Sadmdr,
    GradientReduced,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Mc,
        Method::L1,
        Method::ReweightedL1,
        Method::Adm,
        Method::Sadm,
        Method::Sadmdr,
        Method::GradientReduced,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::L1 => "l1",
            Method::ReweightedL1 => "reweighted-l1",
            Method::Adm => "adm",
            Method::Sadm => "sadm",
            Method::Sadmdr => "sadmdr",
            Method::GradientReduced => "gradient-reduced",
        }
    }

    pub fn needs_reduction(self) -> bool {
        matches!(self, Method::Sadmdr | Method::GradientReduced)
    }

    pub fn rotates(self) -> bool {
        matches!(
            self,
            Method::Adm | Method::Sadm | Method::Sadmdr | Method::GradientReduced
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub order: u32,
    pub mode: BasisMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    pub d_tilde: usize,
    /// Polynomial order in the reduced variables.
    pub order: u32,
}

fn nine() -> usize {
    9
}
fn three() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmConfig {
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default = "nine")]
    pub max_rotations: usize,
    #[serde(default = "three")]
    pub eps_grid_per_iter: usize,
    /// SIR slice count `H`.
    #[serde(default)]
    pub slices: Option<usize>,
}

impl Default for AdmConfig {
    fn default() -> Self {
        Self {
            theta: None,
            max_rotations: 9,
            eps_grid_per_iter: 3,
            slices: None,
        }
    }
}

fn two() -> usize {
    2
}
fn one() -> usize {
    1
}
fn split() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Re-weighted recovery inside the rotation methods.
    #[serde(default)]
    pub reweighted: bool,
    #[serde(default = "two")]
    pub reweight_iters: usize,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "split")]
    pub split_fraction: f64,
    /// Random splits averaged by cross-validation.
    #[serde(default = "one")]
    pub cv_repeats: usize,
    /// Candidate tolerances as multiples of `‖u‖₂`.
    #[serde(default)]
    pub epsilon_grid: Option<Vec<f64>>,
    /// Fixed tolerance as a multiple of `‖u‖₂`; disables cross-validation.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            reweighted: false,
            reweight_iters: 2,
            delta: None,
            split_fraction: 0.8,
            cv_repeats: 1,
            epsilon_grid: None,
            epsilon: None,
        }
    }
}

fn reference_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// Sample moments of fresh evaluations of the QoI.
    Mc {
        #[serde(default = "reference_samples")]
        samples: usize,
    },
    /// Closed-form moments; only some problems provide them.
    Exact,
    /// A JSON file `{"mean": .., "std": ..}`.
    File { path: PathBuf },
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig::Mc { samples: 100_000 }
    }
}

fn quota() -> f64 {
    0.2
}

/// A full replicate study; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<Method>,
    pub m_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// Basis for the unreduced methods; defaults per problem.
    #[serde(default)]
    pub basis: Option<BasisConfig>,
    #[serde(default)]
    pub reduction: Option<ReductionConfig>,
    #[serde(default)]
    pub adm: AdmConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    /// Fresh points for the relative L2 error; zero skips it.
    #[serde(default)]
    pub rel_l2_samples: usize,
    /// Fill the `seconds` column; reports are then no longer reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
    /// Largest tolerated fraction of failed replicates per cell.
    #[serde(default = "quota")]
    pub failure_quota: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Default basis for unreduced fits of each benchmark.
pub fn default_basis(problem: &ProblemSpec) -> BasisConfig {
    match problem {
        ProblemSpec::Ridge { .. } | ProblemSpec::Compressible { .. } => BasisConfig {
            order: 3,
            mode: BasisMode::Full,
        },
        ProblemSpec::Kdv { .. } | ProblemSpec::Groundwater { .. } => BasisConfig {
            order: 2,
            mode: BasisMode::Full,
        },
        ProblemSpec::Highdim { .. } => BasisConfig {
            order: 3,
            mode: BasisMode::NoInteraction,
        },
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn basis(&self) -> BasisConfig {
        self.basis.unwrap_or_else(|| default_basis(&self.problem))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.problem
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let d = self.problem.dim();
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if let Some(m) = self
            .methods
            .iter()
            .enumerate()
            .find_map(|(i, m)| self.methods[..i].contains(m).then_some(m))
        {
            return bad(format!("method '{m}' is listed twice"));
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return bad("m_values must be a non-empty list of positive sizes".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.methods.iter().any(|m| m.needs_reduction()) {
            match self.reduction {
                None => return bad("sadmdr and gradient-reduced need a 'reduction' block".into()),
                Some(r) if r.d_tilde == 0 || r.d_tilde >= d => {
                    return bad(format!("reduction.d_tilde must lie in 1..{d}"));
                }
                _ => {}
            }
        }
        if self.methods.iter().any(|m| *m != Method::Mc) && self.basis().mode == BasisMode::Full {
            let n = full_basis_size(d, self.basis().order).unwrap_or(u128::MAX);
            if n > 200_000 {
                return bad(format!(
                    "a full order-{} basis in {d} dimensions has {n} terms",
                    self.basis().order
                ));
            }
        }
        if self.methods.contains(&Method::Sadm) && self.m_values.iter().any(|&m| m < 2) {
            return bad("sadm needs at least two samples".into());
        }
        if let Some(t) = self.adm.theta {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("adm.theta must be positive, got {t}"));
            }
        }
        let f = &self.fit;
        if !(f.split_fraction > 0.0 && f.split_fraction < 1.0) {
            return bad(format!(
                "fit.split_fraction must lie in (0, 1), got {}",
                f.split_fraction
            ));
        }
        if f.cv_repeats == 0 {
            return bad("fit.cv_repeats must be at least 1".into());
        }
        if let Some(g) = &f.epsilon_grid {
            if g.is_empty() || g.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return bad("fit.epsilon_grid must hold non-negative finite factors".into());
            }
        }
        if let Some(e) = f.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return bad(format!("fit.epsilon must be non-negative, got {e}"));
            }
        }
        if let Some(delta) = f.delta {
            if !(delta > 0.0 && delta.is_finite()) {
                return bad(format!("fit.delta must be positive, got {delta}"));
            }
        }
        match &self.reference {
            ReferenceConfig::Mc { samples } if *samples < 2 => {
                return bad("reference needs at least two samples".into())
            }
            ReferenceConfig::Exact
                if !matches!(
                    self.problem,
                    ProblemSpec::Ridge { .. }
                        | ProblemSpec::Compressible { .. }
                        | ProblemSpec::Highdim { .. }
                ) =>
            {
                return bad(format!(
                    "problem '{}' has no closed-form moments",
                    self.problem.name()
                ));
            }
            _ => {}
        }
        if self.rel_l2_samples != 0 && self.rel_l2_samples < 1000 {
            return bad("rel_l2_samples must be 0 or at least 1000".into());
        }
        if !(0.0..=1.0).contains(&self.failure_quota) {
            return bad("failure_quota must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Fit options with candidate factors scaled by `‖u‖₂`.
    pub fn fit_options(&self, u_norm: f64, reweighted: bool) -> FitOptions {
        let f = &self.fit;
        FitOptions {
            reweighted,
            reweight_iters: f.reweight_iters,
            delta: f.delta,
            cv: CvOptions {
                split_fraction: f.split_fraction,
                repeats: f.cv_repeats,
            },
            candidates: f
                .epsilon_grid
                .as_ref()
                .map(|g| g.iter().map(|c| c * u_norm).collect()),
            epsilon: f.epsilon.map(|e| e * u_norm),
            solver: SolverOptions::default(),
        }
    }

    pub fn adm_options(&self, u_norm: f64) -> AdmOptions {
        AdmOptions {
            theta: self.adm.theta,
            max_rotations: self.adm.max_rotations,
            eps_grid_per_iter: self.adm.eps_grid_per_iter,
            slices: self.adm.slices,
            fit: self.fit_options(u_norm, self.fit.reweighted),
        }
    }
}
