//! Reconstruction of huge quadrature-grid output tensors from a few hundred
//! observed samples, via low-rank CP recovery with an l1 penalty on the
//! polynomial-chaos coefficients, and extraction of the resulting surrogate:
//! coefficients, moments, sparsity and output density.

pub mod basis;
pub mod error;
pub mod pipeline;
pub mod recovery;
pub mod surrogate;
pub mod tensor;

pub use basis::{
    build_basis, enumerate_multi_indices, gauss_quadrature, orthonormal_poly, BasisSet,
    Distribution, MultiIndex, Param, ParameterSpace, QuadratureRule,
};
pub use error::{Error, Result};
pub use recovery::{cross_validate, fit, init_factors, CvReport, FitResult, RecoveryConfig};
pub use surrogate::{extract_coefficients, GpcModel};
pub use tensor::{CpFactors, GridIndex, Rank1Tensor, SampleSet};
