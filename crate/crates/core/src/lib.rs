//! Data-driven sparse polynomial chaos expansions.
//!
//! Inputs may be dependent and are only known through samples. The basis is
//! built by orthonormalizing monomials against the empirical inner product of
//! the training inputs, and sparse expansions are fitted either by
//! correlation-screened forward selection ([`fss`]) or by least angle
//! regression with cross-validation ([`benchmark`]).

pub mod benchmark;
pub mod crossval;
pub mod dataset;
pub mod distributions;
pub mod error;
pub mod fss;
pub mod hexfloat;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod polybasis;
pub mod regression;
pub mod rng;
pub mod stats;

pub use dataset::Dataset;
pub use error::{PceError, Result};
pub use linalg::Matrix;
pub use polybasis::{MultiIndex, OrthonormalBasis};
pub use regression::PceModel;
