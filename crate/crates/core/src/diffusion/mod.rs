//! Diffusion mathematics for both formulations: noise schedules, forward
//! corruption, posteriors, reverse steps, and fast-inference timestep
//! subsequences.

pub mod continuous;
pub mod discrete;
mod inference;
mod schedule;

pub use continuous::{quantize, rescale, ContinuousMode, ContinuousState};
pub use discrete::{Categorical, DiscreteState, StepMode};
pub use inference::{InferenceSchedule, ScheduleKind};
pub use schedule::{flip_matrix, matmul2, Mat2, NoiseSchedule};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiffusionError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("timestep {t} outside [{min}, {max}]")]
    TimestepOutOfRange { t: usize, min: usize, max: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("numerically degenerate: {0}")]
    Degenerate(String),
}

/// Which diffusion formulation a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Discrete,
    Continuous,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Discrete => "discrete",
            Branch::Continuous => "continuous",
        })
    }
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "discrete" => Ok(Branch::Discrete),
            "continuous" => Ok(Branch::Continuous),
            other => Err(format!("unknown branch `{other}` (expected discrete or continuous)")),
        }
    }
}
