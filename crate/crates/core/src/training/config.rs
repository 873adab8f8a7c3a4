use std::path::{Path, PathBuf};

use super::TrainError;
use crate::denoiser::ModelConfig;
use crate::diffusion::Branch;
use crate::instances::Task;

/// Training settings. The file form is one `key = value` per line; `#`
/// starts a comment. Keys are the field names below.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    pub branch: Branch,
    /// Diffusion length T.
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak of the cosine-decayed learning rate.
    pub learning_rate: f64,
    pub seed: u64,
    pub layers: usize,
    pub hidden: usize,
    /// TSP candidate-graph neighbor count; absent means dense.
    pub sparse_k: Option<usize>,
    /// Labeled instance file.
    pub train: Option<PathBuf>,
    /// Checkpoint output path.
    pub out: Option<PathBuf>,
    /// Per-step log output path.
    pub log: Option<PathBuf>,
    /// Write an intermediate checkpoint every this many epochs (0 = only at the end).
    pub checkpoint_every: usize,
    /// Start from this checkpoint's parameters instead of a fresh init.
    pub warm_start: Option<PathBuf>,
    /// After the last epoch, re-estimate batch-norm running statistics with
    /// this many weight-free passes (0 disables).
    pub norm_refresh_passes: usize,
    /// Items per refresh pass.
    pub norm_refresh_batch: usize,
}

impl TrainConfig {
    pub fn new(task: Task, branch: Branch) -> Self {
        TrainConfig {
            task,
            branch,
            diffusion_steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            epochs: 3,
            batch_size: 16,
            learning_rate: 2e-4,
            seed: 0,
            layers: 12,
            hidden: 256,
            sparse_k: None,
            train: None,
            out: None,
            log: None,
            checkpoint_every: 0,
            warm_start: None,
            norm_refresh_passes: 0,
            norm_refresh_batch: 256,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        let mut c = ModelConfig::new(self.task, self.branch).with_size(self.layers, self.hidden);
        c.steps = self.diffusion_steps;
        c.beta_start = self.beta_start;
        c.beta_end = self.beta_end;
        c
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.diffusion_steps == 0 {
            return bad("diffusion_steps must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.layers == 0 || self.hidden < 2 || !self.hidden.is_multiple_of(2) {
            return bad("layers must be positive and hidden even");
        }
        if self.norm_refresh_passes > 0 && self.norm_refresh_batch == 0 {
            return bad("norm_refresh_batch must be positive");
        }
        if matches!(self.sparse_k, Some(0)) {
            return bad("sparse_k must be positive");
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut task = None;
        let mut branch = None;
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainError::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "task" => task = Some(v.parse::<Task>().map_err(TrainError::Config)?),
                "branch" => branch = Some(v.parse::<Branch>().map_err(TrainError::Config)?),
                _ => pairs.push((i + 1, k.to_string(), v.to_string())),
            }
        }
        let mut cfg = TrainConfig::new(
            task.ok_or_else(|| TrainError::Config("missing key `task`".into()))?,
            branch.unwrap_or(Branch::Discrete),
        );
        for (line, k, v) in pairs {
            cfg.set(&k, &v).map_err(|e| TrainError::Config(format!("line {line}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("`{key}` has invalid value `{v}`"))
        }
        match key {
            "task" => self.task = value.parse()?,
            "branch" => self.branch = value.parse()?,
            "diffusion_steps" => self.diffusion_steps = num(key, value)?,
            "beta_start" => self.beta_start = num(key, value)?,
            "beta_end" => self.beta_end = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "sparse_k" => self.sparse_k = Some(num(key, value)?),
            "train" => self.train = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "log" => self.log = Some(PathBuf::from(value)),
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "warm_start" => self.warm_start = Some(PathBuf::from(value)),
            "norm_refresh_passes" => self.norm_refresh_passes = num(key, value)?,
            "norm_refresh_batch" => self.norm_refresh_batch = num(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }
}
