use ndarray::{Array1, Array2};
use rand::Rng as _;

use super::DenoiserError;
use crate::diffusion::Branch;
use crate::instances::Task;
use crate::rng;

/// Architecture and diffusion settings a parameter set was built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub task: Task,
    pub branch: Branch,
    pub layers: usize,
    pub hidden: usize,
    pub time_dim: usize,
    /// Diffusion length T the model is trained for.
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ModelConfig {
    /// Full-size defaults: 12 layers of width 256, T = 1000, linear betas.
    pub fn new(task: Task, branch: Branch) -> Self {
        ModelConfig {
            task,
            branch,
            layers: 12,
            hidden: 256,
            time_dim: 256,
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }

    pub fn with_size(mut self, layers: usize, hidden: usize) -> Self {
        self.layers = layers;
        self.hidden = hidden;
        self.time_dim = hidden;
        self
    }

    pub fn output_dim(&self) -> usize {
        match self.branch {
            Branch::Discrete => 2,
            Branch::Continuous => 1,
        }
    }

    /// Width of the raw node input: sinusoidal coordinates for TSP, the
    /// scalar noisy variable for MIS.
    pub fn node_input_dim(&self) -> usize {
        match self.task {
            Task::Tsp => self.hidden,
            Task::Mis => 1,
        }
    }

    pub fn validate(&self) -> Result<(), DenoiserError> {
        if self.layers == 0 {
            return Err(DenoiserError::InvalidConfig("at least one layer required".into()));
        }
        if self.hidden < 2 || !self.hidden.is_multiple_of(2) {
            return Err(DenoiserError::InvalidConfig(format!("hidden width {} must be even and >= 2", self.hidden)));
        }
        if self.time_dim < 2 || !self.time_dim.is_multiple_of(2) {
            return Err(DenoiserError::InvalidConfig(format!("time embedding width {} must be even", self.time_dim)));
        }
        if self.steps == 0 {
            return Err(DenoiserError::InvalidConfig("diffusion length T must be positive".into()));
        }
        Ok(())
    }
}

/// Dense affine map `x · w + b` with `w` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear { w: Array2::zeros((fan_in, fan_out)), b: Array1::zeros(fan_out) }
    }
}

/// Two affine maps with a ReLU between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl RunningStats {
    pub fn neutral(d: usize) -> Self {
        RunningStats { mean: Array1::zeros(d), var: Array1::ones(d) }
    }
}

/// One anisotropic message-passing layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub p: Array2<f64>,
    pub q: Array2<f64>,
    pub r: Array2<f64>,
    pub edge_mlp: Mlp,
    pub time_mlp: Mlp,
    pub node_norm: BatchNorm,
    pub edge_norm: BatchNorm,
    pub node_stats: RunningStats,
    pub edge_stats: RunningStats,
}

/// Every learnable tensor of the denoiser plus batch-norm running statistics.
///
/// Tensor order (used by the optimizer and the checkpoint format):
/// `node_in.{w,b}`, `edge_in.{w,b}` (TSP only), then per layer
/// `u v p q r`, `edge_mlp.{first,second}.{w,b}`, `time_mlp.{first,second}.{w,b}`,
/// `node_norm.{scale,shift}`, `edge_norm.{scale,shift}`, and finally `head.{w,b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub config: ModelConfig,
    pub node_in: Linear,
    pub edge_in: Option<Linear>,
    pub layers: Vec<Layer>,
    pub head: Linear,
}

impl DenoiserParams {
    /// All-zero tensors (running stats neutral). Also the gradient accumulator shape.
    pub fn zeros(config: ModelConfig) -> Result<Self, DenoiserError> {
        config.validate()?;
        let d = config.hidden;
        let mlp = |fan_in: usize| Mlp { first: Linear::zeros(fan_in, d), second: Linear::zeros(d, d) };
        let norm = || BatchNorm { scale: Array1::zeros(d), shift: Array1::zeros(d) };
        let layers = (0..config.layers)
            .map(|_| Layer {
                u: Array2::zeros((d, d)),
                v: Array2::zeros((d, d)),
                p: Array2::zeros((d, d)),
                q: Array2::zeros((d, d)),
                r: Array2::zeros((d, d)),
                edge_mlp: mlp(d),
                time_mlp: mlp(config.time_dim),
                node_norm: norm(),
                edge_norm: norm(),
                node_stats: RunningStats::neutral(d),
                edge_stats: RunningStats::neutral(d),
            })
            .collect();
        Ok(DenoiserParams {
            config,
            node_in: Linear::zeros(config.node_input_dim(), d),
            edge_in: matches!(config.task, Task::Tsp).then(|| Linear::zeros(1, d)),
            layers,
            head: Linear::zeros(d, config.output_dim()),
        })
    }

    /// Weights and biases uniform in `±1/√fan_in`; batch-norm scale 1 and
    /// shift 0; running statistics neutral.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, DenoiserError> {
        let mut params = Self::zeros(config)?;
        let mut rng = rng::stream(seed, 0);
        let mut fill = |lin: &mut Linear| {
            let bound = 1.0 / (lin.w.nrows() as f64).sqrt();
            lin.w.mapv_inplace(|_| rng.random_range(-bound..=bound));
            lin.b.mapv_inplace(|_| rng.random_range(-bound..=bound));
        };
        fill(&mut params.node_in);
        if let Some(e) = params.edge_in.as_mut() {
            fill(e);
        }
        for layer in &mut params.layers {
            for m in [&mut layer.u, &mut layer.v, &mut layer.p, &mut layer.q, &mut layer.r] {
                let mut lin = Linear { w: std::mem::take(m), b: Array1::zeros(0) };
                fill(&mut lin);
                *m = lin.w;
            }
            fill(&mut layer.edge_mlp.first);
            fill(&mut layer.edge_mlp.second);
            fill(&mut layer.time_mlp.first);
            fill(&mut layer.time_mlp.second);
            layer.node_norm.scale.fill(1.0);
            layer.edge_norm.scale.fill(1.0);
        }
        fill(&mut params.head);
        Ok(params)
    }

    /// Learnable tensors in canonical order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        fn lin<'a>(out: &mut Vec<&'a [f64]>, l: &'a Linear) {
            out.push(l.w.as_slice().expect("standard layout"));
            out.push(l.b.as_slice().expect("standard layout"));
        }
        lin(&mut out, &self.node_in);
        if let Some(e) = &self.edge_in {
            lin(&mut out, e);
        }
        for layer in &self.layers {
            for m in [&layer.u, &layer.v, &layer.p, &layer.q, &layer.r] {
                out.push(m.as_slice().expect("standard layout"));
            }
            lin(&mut out, &layer.edge_mlp.first);
            lin(&mut out, &layer.edge_mlp.second);
            lin(&mut out, &layer.time_mlp.first);
            lin(&mut out, &layer.time_mlp.second);
            for v in [&layer.node_norm.scale, &layer.node_norm.shift, &layer.edge_norm.scale, &layer.edge_norm.shift] {
                out.push(v.as_slice().expect("standard layout"));
            }
        }
        lin(&mut out, &self.head);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        fn lin<'a>(out: &mut Vec<&'a mut [f64]>, l: &'a mut Linear) {
            out.push(l.w.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        lin(&mut out, &mut self.node_in);
        if let Some(e) = self.edge_in.as_mut() {
            lin(&mut out, e);
        }
        for layer in &mut self.layers {
            for m in [&mut layer.u, &mut layer.v, &mut layer.p, &mut layer.q, &mut layer.r] {
                out.push(m.as_slice_mut().expect("standard layout"));
            }
            lin(&mut out, &mut layer.edge_mlp.first);
            lin(&mut out, &mut layer.edge_mlp.second);
            lin(&mut out, &mut layer.time_mlp.first);
            lin(&mut out, &mut layer.time_mlp.second);
            for v in [
                &mut layer.node_norm.scale,
                &mut layer.node_norm.shift,
                &mut layer.edge_norm.scale,
                &mut layer.edge_norm.shift,
            ] {
                out.push(v.as_slice_mut().expect("standard layout"));
            }
        }
        lin(&mut out, &mut self.head);
        out
    }

    /// Running statistics, per layer: node mean, node var, edge mean, edge var.
    pub fn running_stats(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [&l.node_stats.mean, &l.node_stats.var, &l.edge_stats.mean, &l.edge_stats.var])
            .map(|a| a.as_slice().expect("standard layout"))
            .collect()
    }

    pub fn running_stats_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [&mut l.node_stats.mean, &mut l.node_stats.var, &mut l.edge_stats.mean, &mut l.edge_stats.var]
            })
            .map(|a| a.as_slice_mut().expect("standard layout"))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Largest absolute entry over all learnable tensors; used for sanity checks.
    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
            && self.running_stats().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &DenoiserParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += scale * b;
            }
        }
    }
}
