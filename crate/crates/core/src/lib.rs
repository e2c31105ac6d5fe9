//! Rigorous Lasso estimation with data-driven penalties and the inference
//! built on it: post-Lasso, the sup-score test, orthogonal inference on
//! target coefficients, instrumental variables under selection and
//! treatment-effect estimation.

pub mod bootstrap;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod inference;
pub mod iv;
pub mod linalg;
pub mod report;
pub mod rlasso;
pub mod simkit;
pub mod stats;
pub mod treatment;

pub use error::{Error, Result};
