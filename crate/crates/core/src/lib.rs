//! Estimation of the parametric part of high-dimensional single and multiple
//! index models with non-Gaussian covariates.
//!
//! The estimators combine Stein's identity with heavy-tail truncation:
//! first-order links are recovered from a truncated mean of `Y * S(X)` by a
//! closed-form soft-threshold (sparse vectors) or singular-value threshold
//! (low-rank matrices and square-unfolded tensors); second-order links are
//! recovered from a truncated mean of `Y * T(X)` through a Fantope-constrained
//! sparse PCA program solved by ADMM.

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod robusttrunc;
pub mod scoremodel;
pub mod seed;
pub mod simlab;
pub mod spectral;
pub mod steincore;

pub use dataset::{CovariateShape, SimDataset};
pub use error::{Error, Result};
pub use scoremodel::{MomentBound, ScoreModel};
