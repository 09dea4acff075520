//! Optimally weighted least-squares learning of operators between function
//! spaces.
//!
//! Inputs and outputs live in spectral coordinates. Inputs are coefficient
//! vectors `fhat` drawn from a product of symmetric Jacobi laws, and outputs
//! are coefficient vectors in an orthonormal output basis. Operator spaces are
//! tensor products `[d_out] x P`, so every fit reduces to a block least-squares
//! problem on `N_eff = dim P` scalar features.

pub mod error;
pub mod evaluation;
pub mod index_sets;
pub mod measures;
pub mod operator_basis;
pub mod pde_data;
pub mod rng;
pub mod sampling;
pub mod wls_solver;

pub use error::{Error, Result};
pub use nalgebra;
pub use index_sets::{IndexSetKind, IndexSetSpec, MultiIndex};
pub use measures::{PolynomialFamily, ProductMeasure, QuadratureRule, UnivariateMeasure};
pub use operator_basis::{FeatureMap, LinearRankOneBasis, OperatorBasis, PolyOperatorBasis};
pub use rng::RngSeed;
pub use sampling::{SampleBatch, Sampler};
pub use wls_solver::{GramSummary, OperatorEstimate, StabilityBudget, WlsSystem};

