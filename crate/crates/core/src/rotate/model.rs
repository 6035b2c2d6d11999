use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{enumerate_basis, BasisMode, MultiIndexBasis};
use crate::numerics::row_orthonormality_error;

pub const MODEL_FORMAT: &str = "rpce-surrogate";
pub const MODEL_VERSION: u32 = 1;

/// One pass of a fit: the warm start or a rotation iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationRecord {
    pub iteration: usize,
    pub epsilon: Option<f64>,
    /// `|Σ|U_ij| − d|` for the rotation applied in this pass.
    pub distance: Option<f64>,
    pub residual: Option<f64>,
    pub validation: Option<f64>,
    pub error: Option<String>,
}

/// `u(ξ) ≈ Σ c_n ψ_n(A Â ξ)`; `Â` is the identity when absent.
#[derive(Clone, Debug)]
pub struct SurrogateModel {
    pub basis: MultiIndexBasis,
    pub coeffs: Array1<f64>,
    /// `d̃ × d`, row-orthonormal.
    pub reduction: Option<Array2<f64>>,
    /// Orthogonal, sized to the basis dimension.
    pub rotation: Array2<f64>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl SurrogateModel {
    pub fn new(basis: MultiIndexBasis, coeffs: Array1<f64>) -> Result<Self> {
        let d = basis.dim();
        let model = Self {
            basis,
            coeffs,
            reduction: None,
            rotation: Array2::eye(d),
            history: Vec::new(),
            converged: true,
        };
        model.validate()?;
        Ok(model)
    }

    /// Dimension of the points accepted by [`evaluate`](Self::evaluate).
    pub fn input_dim(&self) -> usize {
        self.reduction
            .as_ref()
            .map_or(self.basis.dim(), |r| r.ncols())
    }

    /// The combined linear map `A Â` from inputs to basis variables.
    pub fn input_map(&self) -> Array2<f64> {
        match &self.reduction {
            Some(r) => self.rotation.dot(r),
            None => self.rotation.clone(),
        }
    }

    /// Maps input points (rows) to the basis variables `η = A Â ξ`.
    pub fn transform(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        if points.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: points.ncols(),
            });
        }
        Ok(points.dot(&self.input_map().t()))
    }

    pub fn evaluate(&self, points: ArrayView2<f64>) -> Result<Array1<f64>> {
        let eta = self.transform(points)?;
        self.basis.eval_expansion(self.coeffs.view(), eta.view())
    }

    /// `(c₀, Σ_{n≥1} c_n²)`.
    pub fn moments(&self) -> (f64, f64) {
        let mean = self.coeffs.first().copied().unwrap_or(0.0);
        let var = self.coeffs.iter().skip(1).map(|c| c * c).sum();
        (mean, var)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.basis.dim();
        if self.coeffs.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                found: self.coeffs.len(),
            });
        }
        if self.rotation.dim() != (d, d) {
            return Err(Error::invalid(format!(
                "rotation is {:?}, expected {d}x{d}",
                self.rotation.dim()
            )));
        }
        if row_orthonormality_error(self.rotation.view()) > 1e-8 {
            return Err(Error::invalid("rotation is not orthogonal"));
        }
        if let Some(r) = &self.reduction {
            if r.nrows() != d || r.ncols() < d {
                return Err(Error::invalid(format!(
                    "reduction is {:?}, expected {d} rows and at least {d} columns",
                    r.dim()
                )));
            }
            if row_orthonormality_error(r.view()) > 1e-8 {
                return Err(Error::invalid("reduction rows are not orthonormal"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_model(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    input_dim: usize,
    reduced_dim: Option<usize>,
    order: u32,
    mode: BasisMode,
    reduction: Option<Vec<Vec<f64>>>,
    rotation: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    converged: bool,
    history: Vec<IterationRecord>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Format(format!("{what} rows have unequal length")));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Format(format!("{what}: {e}")))
}

impl ModelFile {
    fn from_model(m: &SurrogateModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            input_dim: m.input_dim(),
            reduced_dim: m.reduction.as_ref().map(|r| r.nrows()),
            order: m.basis.order(),
            mode: m.basis.mode(),
            reduction: m.reduction.as_ref().map(rows),
            rotation: rows(&m.rotation),
            coeffs: m.coeffs.to_vec(),
            converged: m.converged,
            history: m.history.clone(),
        }
    }

    fn into_model(self) -> Result<SurrogateModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "unexpected format tag '{}'",
                self.format
            )));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        let basis_dim = self.reduced_dim.unwrap_or(self.input_dim);
        if self.reduced_dim.is_some() != self.reduction.is_some() {
            return Err(Error::Format(
                "reduced_dim and reduction must appear together".into(),
            ));
        }
        let basis = enumerate_basis(basis_dim, self.order, self.mode)?;
        let reduction = self
            .reduction
            .map(|r| from_rows(r, "reduction"))
            .transpose()?;
        if let Some(r) = &reduction {
            if r.ncols() != self.input_dim {
                return Err(Error::Format(format!(
                    "reduction has {} columns, input_dim is {}",
                    r.ncols(),
                    self.input_dim
                )));
            }
        }
        let model = SurrogateModel {
            basis,
            coeffs: Array1::from(self.coeffs),
            reduction,
            rotation: from_rows(self.rotation, "rotation")?,
            history: self.history,
            converged: self.converged,
        };
        model.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(model)
    }
}
