//! Sparse Hermite polynomial-chaos surrogates built from few samples.
//!
//! The pipeline fits `u(ξ) ≈ Σ c_n ψ_n(A Â ξ)` for standard-normal inputs
//! `ξ`, where the coefficients come from basis pursuit denoising, `A` is an
//! orthogonal rotation found by alternating between coefficient recovery and
//! the eigenvectors of the gradient matrix, and `Â` is an optional reduction
//! estimated by sliced inverse regression.

pub mod error;
pub mod harness;
pub mod hermite;
pub mod numerics;
pub mod problems;
pub mod rotate;
pub mod sir;
pub mod sparse_recovery;

pub use error::{Error, Result};

/// Library version recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
