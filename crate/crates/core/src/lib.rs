//! Causality-aware Shapley feature attributions.
//!
//! The pipeline discovers a CPDAG over the columns of a [`data::DataTable`]
//! with the PC algorithm, estimates edge weights and per-feature total effects
//! with local IDA, and then explains a black-box [`model::Predictor`] by
//! sampling out-of-coalition features from the interventional distribution
//! implied by the discovered graph. Marginal-sampling and Kernel SHAP
//! baselines, an exact Shapley oracle and an evaluation harness (insertion
//! curves, reduced-feature ground truth) are included.

pub mod attribution;
pub mod config;
pub mod data;
pub mod discovery;
pub mod effects;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod model;
pub mod output;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
