//! Anisotropic edge-gated graph network that predicts clean solutions
//! (discrete branch) or injected noise (continuous branch), with a
//! hand-written reverse pass.

mod embed;
mod graph;
mod linalg;
mod model;
mod params;

pub use embed::{sinusoidal_embedding, POSITION_SCALE};
pub use graph::GraphInput;
pub use linalg::{BatchStats, NORM_EPS};
pub use model::{backward, forward, update_running_stats, ForwardPass, LayerStats, Sample};
pub use params::{BatchNorm, DenoiserParams, Layer, Linear, Mlp, ModelConfig, RunningStats};

use ndarray::ArrayView2;
use thiserror::Error;

use crate::diffusion::{Branch, Categorical};
use crate::instances::Task;

/// Momentum of the running batch-norm statistics.
pub const NORM_MOMENTUM: f64 = 0.9;

#[derive(Debug, Error, PartialEq)]
pub enum DenoiserError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("{what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("model is built for {expected}, input is {got}")]
    TaskMismatch { expected: Task, got: Task },
    #[error("model uses the {expected} branch, caller asked for {got}")]
    BranchMismatch { expected: Branch, got: Branch },
    #[error("invalid graph input: {0}")]
    InvalidGraph(String),
    #[error("stale cache: {0}")]
    StaleCache(String),
}

/// Softmax over the two logits of each row.
pub fn predict_x0_probs(logits: ArrayView2<f64>) -> Result<Vec<Categorical>, DenoiserError> {
    if logits.ncols() != 2 {
        return Err(DenoiserError::BranchMismatch { expected: Branch::Continuous, got: Branch::Discrete });
    }
    Ok(logits
        .rows()
        .into_iter()
        .map(|r| {
            let top = r[0].max(r[1]);
            let a = (r[0] - top).exp();
            let b = (r[1] - top).exp();
            [a / (a + b), b / (a + b)]
        })
        .collect())
}

/// The single regression output of each row, passed through.
pub fn predict_eps(outputs: ArrayView2<f64>) -> Result<Vec<f64>, DenoiserError> {
    if outputs.ncols() != 1 {
        return Err(DenoiserError::BranchMismatch { expected: Branch::Discrete, got: Branch::Continuous });
    }
    Ok(outputs.column(0).to_vec())
}

/// What a denoiser hands back for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    X0Probs(Vec<Categorical>),
    Eps(Vec<f64>),
}

/// Anything that can play the network's role in a reverse chain. The trained
/// model is the main implementor; tests plug in rigged predictors.
pub trait Denoise: Sync {
    fn config(&self) -> ModelConfig;

    /// One prediction per sample, in order.
    fn predict(&self, samples: &[Sample]) -> Result<Vec<Prediction>, DenoiserError>;
}

impl Denoise for DenoiserParams {
    fn config(&self) -> ModelConfig {
        self.config
    }

    fn predict(&self, samples: &[Sample]) -> Result<Vec<Prediction>, DenoiserError> {
        let pass = forward(self, samples, false)?;
        (0..pass.num_samples())
            .map(|i| {
                let out = pass.sample_outputs(i);
                match self.config.branch {
                    Branch::Discrete => predict_x0_probs(out).map(Prediction::X0Probs),
                    Branch::Continuous => predict_eps(out).map(Prediction::Eps),
                }
            })
            .collect()
    }
}
