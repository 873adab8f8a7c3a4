//! Graph-based denoising diffusion solvers for the traveling salesman and
//! maximum independent set problems.
//!
//! The crate is organized bottom-up:
//!
//! - [`instances`]: problem instances, solutions, generators, file format
//! - [`oracle`]: exact and heuristic reference solvers used for labels
//! - [`diffusion`]: discrete (Bernoulli) and continuous (Gaussian) diffusion
//! - [`denoiser`]: the anisotropic graph network and its gradients
//! - [`training`]: losses, optimizer, training loop, checkpoints
//! - [`decoding`]: reverse chains, greedy decoding, 2-opt, multi-sampling
//! - [`harness`]: evaluation, sweeps, and the command-line interface

pub mod decoding;
pub mod denoiser;
pub mod diffusion;
pub mod harness;
pub mod instances;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod training;
