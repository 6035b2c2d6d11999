//! Normalized probabilists' Hermite polynomials in `d` variables: basis
//! enumeration, measurement matrices and derivative-coupling kernels.

mod basis;
mod kernel;

pub use basis::{
    enumerate_basis, enumerate_basis_capped, eval_univariate, eval_univariate_all, full_basis_size,
    measurement_matrix, BasisMode, MultiIndex, MultiIndexBasis, DEFAULT_BASIS_CAP,
};
pub use kernel::{grad_kernel, KernelMatrix, KernelSet};
