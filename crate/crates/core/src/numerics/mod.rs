//! Sampling, symmetric eigendecomposition, sparse SPD solves, quadrature and
//! root finding.

mod dense;
mod eigen;
mod quad;
mod rng;
mod roots;
mod sparse;

pub use dense::{cholesky, row_orthonormality_error, solve_lower, solve_lower_transpose};
pub use eigen::{sym_eigen, SymEigen};
pub use quad::adaptive_simpson;
pub use rng::{sample_std_normal, RngStream};
pub use roots::{find_root, find_roots_increasing};
pub use sparse::{solve_sym_sparse, CsrMatrix};
