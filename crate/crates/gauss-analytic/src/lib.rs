//! Closed-form KL divergences and e-power building blocks for Gaussian
//! location families with fixed covariances.

mod density;
mod kl;
mod matrix;

pub use density::{log_lik_iid, log_marginal_location, log_normal_pdf, sample_mean, scatter_quad};
pub use kl::{
    check_psd, d_gauss, d_gauss_eigen, d_triple, gaussian_cross_kl, gaussian_kl, mle_marginal,
    relative_eigenvalues, trace_ratio, GaussianPrior,
};
pub use matrix::{CovMatrix, MeanVec, SpdFactor, SYMMETRY_TOL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("zero-dimensional matrix")]
    EmptyDimension,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("determinant is not positive")]
    NonPositiveDeterminant,
    #[error("sample size must be positive")]
    ZeroSampleSize,
}
