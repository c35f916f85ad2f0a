//! Kernel sensor fusion for paired point clouds.
//!
//! Two sensors observe the same latent sample set through different embeddings.
//! This crate builds Gaussian affinity graphs on each sensor, composes their
//! row-stochastic diffusion operators into a single fused operator, and embeds
//! the samples with the leading eigenvectors of that operator.
//!
//! The full n x n composition is quadratic in the sample count, so the main
//! entry point is the landmark variant: diffusion is routed through m paired
//! landmark points, the eigenproblem shrinks to m x m, and the eigenvectors are
//! extrapolated back to all n samples. A normalization exponent `alpha` on the
//! landmark degrees compensates for non-uniform landmark densities.
//!
//! Module map:
//! - [`kernels`]: Gaussian kernels and affinity matrices (full and landmark).
//! - [`manifolds`]: synthetic paired datasets on curves, tori and spheres.
//! - [`landmarks`]: landmark selection (subsets, density samples, stratified).
//! - [`spectral`]: dense nonsymmetric eigendecomposition with a fixed ordering
//!   and sign convention.
//! - [`diffusion`]: the fused diffusion models and their embeddings.
//! - [`metrics`]: eigenvalue/eigenvector comparisons and rotation-aligned
//!   embedding similarity.
//! - [`oracle`]: quadrature realizations of the continuous operators behind the
//!   discrete constructions, for convergence tests.
//! - [`io`]: CSV and JSON interchange for points, landmarks and embeddings.

extern crate blas_src;

pub mod diffusion;
pub mod io;
pub mod kernels;
pub mod landmarks;
pub mod manifolds;
pub mod metrics;
pub mod oracle;
pub mod spectral;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Shapes of two inputs are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The dense eigensolver failed to converge or rejected its input.
    #[error("eigensolver failure: {0}")]
    Solver(String),
    /// A quadrature grid is too coarse for the requested kernel bandwidth.
    #[error("quadrature resolution too coarse: {0}")]
    Resolution(String),
    /// A ratio against a reference value whose modulus is below the rank floor.
    #[error("undefined ratio at index {index}: reference modulus {modulus:e} is below the floor")]
    UndefinedRatio { index: usize, modulus: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
