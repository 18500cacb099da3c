//! Variable selection for ultrahigh-dimensional linear models.
//!
//! The crate screens predictors by marginal correlation (SIS), by iterated
//! ridge thresholding, or iteratively on residuals, and then fits the
//! surviving columns with penalized least squares (SCAD, MCP, Lasso,
//! adaptive Lasso) or the Dantzig selector. Synthetic designs, Monte Carlo
//! checks of random-matrix facts and a replicated experiment runner sit on
//! top.

pub mod dantzig;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod penalized;
pub mod pipelines;
pub mod rng;
pub mod screening;
pub mod simgen;
pub mod theory;

pub use error::{Error, Result};
pub use model::{
    l2_error, n_over_log_n, ols_fit, standardize, standardize_with, Dataset, GroundTruth,
    ModelEstimate, SdDenominator, StandardizedDesign,
};
