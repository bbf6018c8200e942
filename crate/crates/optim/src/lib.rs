//! Derivative-free optimizers for circuit parameters.
//!
//! [`cobyla`] is a linear-model trust-region method for box-constrained
//! minimization. [`bo`] fits a Gaussian process to the evaluation history and
//! proposes the expected-improvement maximizer; it maximizes.

pub mod bo;
pub mod cobyla;
pub mod gp;
pub mod sequence;

pub use bo::{bo_step, expected_improvement, BayesOpt, BoConfig};
pub use cobyla::{cobyla_minimize, CobylaError, CobylaResult};
pub use gp::{GpConfig, GpModel};

/// One evaluated point of an optimization run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObjectiveSample {
    pub x: Vec<f64>,
    pub y: f64,
}
