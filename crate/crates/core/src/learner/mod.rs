//! Hinge-loss minimization over `W` and the two end-to-end learners.

mod hinge;
mod kkt;
mod pipeline;
mod solver;

pub use hinge::{hinge_loss, subgradient, weighted_hinge};
pub use kkt::{active_set, kkt_diagnostics, recover_multipliers, ActiveSet, KktDiagnostics};
pub use pipeline::{
    learn_adversarial, learn_malicious, learn_malicious_from_set, PipelineConfig, PipelineReport,
};
pub use solver::{minimize_hinge, stationarity_residual, HalfspaceModel, HingeParams};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::robustify::RobustifyError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("weight/sample length mismatch ({weights} weights, {samples} samples)")]
    LengthMismatch { weights: usize, samples: usize },
    #[error("invalid parameter {name} = {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("no effective sample mass")]
    EmptyMass,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Robustify(#[from] RobustifyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}
