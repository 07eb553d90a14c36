//! Experiment harness: eigenvalue and eigenfunction sweeps under surgery, containment
//! thresholds, Payne studies on planar domains, nodal-domain searches on the sphere, and
//! report emission.

pub mod common;
pub mod config;
pub mod lewy;
pub mod payne;
pub mod report;
pub mod sweep;

pub use config::{Geometry, SweepConfig};
pub use report::{emit_report, Constant, ExperimentReport, Record};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(#[from] nodal_core::Error),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    /// Process exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Io(_) => 2,
            LabError::Numerical(_) | LabError::Precondition(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
