//! Supervised denoising training: corrupt a labeled solution to a random
//! timestep, ask the network to undo it, and follow the loss gradient with
//! Adam under a cosine-decayed learning rate.

mod checkpoint;
mod config;
mod loss;
mod optim;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_model, save_checkpoint, MAGIC, VERSION,
};
pub use config::TrainConfig;
pub use loss::{loss_continuous, loss_discrete};
pub use optim::{cosine_lr, Adam, BETA1, BETA2, EPSILON};

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::decoding::graph_input;
use crate::denoiser::{
    backward, forward, update_running_stats, DenoiserError, DenoiserParams, ForwardPass, GraphInput, ModelConfig,
    Sample, NORM_MOMENTUM,
};
use crate::diffusion::{continuous, discrete, Branch, DiffusionError, NoiseSchedule};
use crate::instances::{load_instances, Instance, InstanceError};
use crate::{par, rng};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("instance {id} has no label")]
    Unlabeled { id: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint checksum mismatch (truncated or corrupted file)")]
    Checksum,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Denoiser(#[from] DenoiserError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A labeled instance prepared for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub id: usize,
    pub graph: GraphInput,
    pub target: Vec<u8>,
}

impl TrainItem {
    pub fn new(instance: &Instance, hidden: usize, sparse_k: Option<usize>) -> Result<Self, TrainError> {
        let (graph, _) = graph_input(instance, hidden, sparse_k)?;
        let target = graph.targets(instance).ok_or(TrainError::Unlabeled { id: instance.id() })?;
        Ok(TrainItem { id: instance.id(), graph, target })
    }
}

/// Prepare a whole dataset, failing on the first unlabeled instance.
pub fn prepare(instances: &[Instance], hidden: usize, sparse_k: Option<usize>) -> Result<Vec<TrainItem>, TrainError> {
    par::map_slice(instances, |inst| TrainItem::new(inst, hidden, sparse_k)).into_iter().collect()
}

/// The noisy input drawn for one item: the timestep, the network input and,
/// for the continuous branch, the noise the network should recover.
#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub t: usize,
    pub x: Vec<f64>,
    pub eps: Option<Vec<f64>>,
}

/// Draw `t ~ U{1..T}` and a forward sample of the item's label.
pub fn corrupt(
    item: &TrainItem,
    branch: Branch,
    sched: &NoiseSchedule,
    rng: &mut rng::Rng,
) -> Result<Corruption, TrainError> {
    let t = rng.random_range(1..=sched.steps());
    Ok(match branch {
        Branch::Discrete => {
            let state = discrete::forward_sample(&item.target, t, sched, rng)?;
            Corruption { t, x: state.bits.iter().map(|&b| b as f64).collect(), eps: None }
        }
        Branch::Continuous => {
            let (state, eps) = continuous::forward_sample(&item.target, t, sched, rng)?;
            Corruption { t, x: state.values, eps: Some(eps) }
        }
    })
}

/// Mean loss over every variable in the batch, the pass that produced it,
/// and the gradient of the loss with respect to the network outputs.
pub fn batch_loss(
    params: &DenoiserParams,
    items: &[&TrainItem],
    corruptions: &[Corruption],
    train: bool,
) -> Result<(f64, ForwardPass, Array2<f64>), TrainError> {
    if items.len() != corruptions.len() {
        return Err(TrainError::ShapeMismatch(format!("{} items, {} corruptions", items.len(), corruptions.len())));
    }
    let samples: Vec<Sample> =
        items.iter().zip(corruptions).map(|(it, c)| Sample { graph: &it.graph, x: &c.x, t: c.t }).collect();
    let pass = forward(params, &samples, train)?;
    let (loss, grad) =
        match params.config.branch {
            Branch::Discrete => {
                let targets: Vec<u8> = items.iter().flat_map(|it| it.target.iter().copied()).collect();
                loss_discrete(pass.outputs.view(), &targets)?
            }
            Branch::Continuous => {
                let mut eps = Vec::with_capacity(pass.outputs.nrows());
                for c in corruptions {
                    eps.extend_from_slice(c.eps.as_deref().ok_or_else(|| {
                        TrainError::ShapeMismatch("continuous training needs the drawn noise".into())
                    })?);
                }
                loss_continuous(pass.outputs.view(), &eps)?
            }
        };
    Ok((loss, pass, grad))
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: DenoiserParams,
    pub optimizer: Adam,
    /// Optimizer steps taken so far.
    pub step: u64,
    /// Completed epochs.
    pub epoch: u64,
    pub rng: rng::Rng,
}

impl TrainState {
    /// Fresh parameters from `seed`; the data stream is derived from the same seed.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, TrainError> {
        let params = DenoiserParams::init(config, seed)?;
        Ok(Self::from_params(params, seed))
    }

    pub fn from_params(params: DenoiserParams, seed: u64) -> Self {
        let optimizer = Adam::for_params(&params);
        TrainState { params, optimizer, step: 0, epoch: 0, rng: rng::stream(seed, 1) }
    }

    pub fn schedule(&self) -> Result<NoiseSchedule, TrainError> {
        let c = &self.params.config;
        Ok(NoiseSchedule::linear(c.steps, c.beta_start, c.beta_end)?)
    }
}

/// One optimizer step on fixed corruptions. Returns the pre-update loss.
pub fn train_step_with(
    state: &mut TrainState,
    items: &[&TrainItem],
    corruptions: &[Corruption],
    lr: f64,
) -> Result<f64, TrainError> {
    let (loss, pass, grad) = batch_loss(&state.params, items, corruptions, true)?;
    let grads = backward(&state.params, &pass, &grad)?;
    state.optimizer.step_params(&mut state.params, &grads, lr);
    update_running_stats(&mut state.params, &pass.stats, NORM_MOMENTUM);
    state.step += 1;
    Ok(loss)
}

/// Corrupt each item with the state's generator and take one step.
pub fn train_step(
    state: &mut TrainState,
    items: &[&TrainItem],
    sched: &NoiseSchedule,
    lr: f64,
) -> Result<f64, TrainError> {
    let branch = state.params.config.branch;
    let corruptions =
        items.iter().map(|it| corrupt(it, branch, sched, &mut state.rng)).collect::<Result<Vec<_>, _>>()?;
    train_step_with(state, items, &corruptions, lr)
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: u64,
    pub loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

impl StepRecord {
    pub const HEADER: &'static str = "step\tepoch\tloss\tlr\tseconds";

    pub fn line(&self) -> String {
        format!("{}\t{}\t{:.6}\t{:.6e}\t{:.3}", self.step, self.epoch, self.loss, self.lr, self.seconds)
    }
}

/// Run epochs `state.epoch..epochs` over `items`, shuffling each epoch.
/// `on_step` sees every step; `on_epoch` runs after each completed epoch.
pub fn train_epochs(
    state: &mut TrainState,
    items: &[TrainItem],
    epochs: usize,
    batch_size: usize,
    peak_lr: f64,
    on_step: &mut dyn FnMut(&StepRecord) -> Result<(), TrainError>,
    on_epoch: &mut dyn FnMut(&TrainState) -> Result<(), TrainError>,
) -> Result<(), TrainError> {
    if batch_size == 0 {
        return Err(TrainError::Config("batch_size must be positive".into()));
    }
    let sched = state.schedule()?;
    let per_epoch = items.len().div_ceil(batch_size) as u64;
    let total = per_epoch * epochs as u64;
    let start = Instant::now();
    let mut order: Vec<usize> = (0..items.len()).collect();
    while (state.epoch as usize) < epochs {
        order.sort_unstable();
        order.shuffle(&mut state.rng);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&TrainItem> = chunk.iter().map(|&i| &items[i]).collect();
            let lr = cosine_lr(peak_lr, state.step, total);
            let loss = train_step(state, &batch, &sched, lr)?;
            on_step(&StepRecord {
                step: state.step,
                epoch: state.epoch,
                loss,
                lr,
                seconds: start.elapsed().as_secs_f64(),
            })?;
        }
        state.epoch += 1;
        on_epoch(state)?;
    }
    Ok(())
}

/// Re-estimate the batch-norm running statistics of a trained model without
/// touching its weights. Each pass corrupts a window of `batch_size` items at
/// uniform t, runs a training-mode forward pass and folds the batch
/// statistics in. Small training batches leave the running averages noisy
/// and skewed toward whatever t values the last few steps drew; this replaces
/// them with estimates over large mixed-t batches.
pub fn refresh_norm_stats(
    params: &mut DenoiserParams,
    items: &[TrainItem],
    passes: usize,
    batch_size: usize,
    seed: u64,
) -> Result<(), TrainError> {
    if items.is_empty() || passes == 0 {
        return Ok(());
    }
    if batch_size == 0 {
        return Err(TrainError::Config("norm refresh batch size must be positive".into()));
    }
    let c = &params.config;
    let sched = NoiseSchedule::linear(c.steps, c.beta_start, c.beta_end)?;
    let branch = c.branch;
    let mut r = rng::stream(seed, 3);
    for i in 0..passes {
        let refs: Vec<&TrainItem> =
            items.iter().cycle().skip((i * batch_size) % items.len()).take(batch_size).collect();
        let corr = refs.iter().map(|it| corrupt(it, branch, &sched, &mut r)).collect::<Result<Vec<_>, _>>()?;
        let (_, pass, _) = batch_loss(params, &refs, &corr, true)?;
        update_running_stats(params, &pass.stats, NORM_MOMENTUM);
    }
    Ok(())
}

/// Path of the intermediate checkpoint written after `epoch`.
pub fn epoch_checkpoint_path(out: &Path, epoch: u64) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(format!(".epoch{epoch}"));
    PathBuf::from(name)
}

/// Load the dataset named in `cfg`, train, write the checkpoint and log.
/// With zero epochs the initialized model is written unchanged.
pub fn run(cfg: &TrainConfig) -> Result<TrainState, TrainError> {
    cfg.validate()?;
    let path = cfg.train.as_ref().ok_or_else(|| TrainError::Config("missing key `train`".into()))?;
    let instances = load_instances(path)?;
    if let Some(bad) = instances.iter().find(|i| i.task() != cfg.task) {
        return Err(TrainError::Config(format!("instance {} is {}, config says {}", bad.id(), bad.task(), cfg.task)));
    }
    let items = prepare(&instances, cfg.hidden, cfg.sparse_k)?;
    let mut state = match &cfg.warm_start {
        Some(p) => {
            let params = load_model(p)?;
            if params.config != cfg.model_config() {
                return Err(TrainError::Config(format!(
                    "warm-start checkpoint {} has a different architecture",
                    p.display()
                )));
            }
            TrainState::from_params(params, cfg.seed)
        }
        None => TrainState::new(cfg.model_config(), cfg.seed)?,
    };
    let mut log = match &cfg.log {
        Some(p) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
            writeln!(f, "{}", StepRecord::HEADER)?;
            Some(f)
        }
        None => None,
    };
    let mut on_step = |r: &StepRecord| -> Result<(), TrainError> {
        if let Some(f) = log.as_mut() {
            writeln!(f, "{}", r.line())?;
        }
        Ok(())
    };
    let mut on_epoch = |s: &TrainState| -> Result<(), TrainError> {
        if let Some(out) = &cfg.out {
            if cfg.checkpoint_every > 0
                && s.epoch.is_multiple_of(cfg.checkpoint_every as u64)
                && (s.epoch as usize) < cfg.epochs
            {
                save_checkpoint(epoch_checkpoint_path(out, s.epoch), s)?;
            }
        }
        Ok(())
    };
    train_epochs(&mut state, &items, cfg.epochs, cfg.batch_size, cfg.learning_rate, &mut on_step, &mut on_epoch)?;
    if let Some(f) = log.as_mut() {
        f.flush()?;
    }
    if cfg.epochs > 0 {
        refresh_norm_stats(&mut state.params, &items, cfg.norm_refresh_passes, cfg.norm_refresh_batch, cfg.seed)?;
    }
    if let Some(out) = &cfg.out {
        save_checkpoint(out, &state)?;
    }
    Ok(state)
}

/// Mean loss of `params` over `items` with one fixed corruption per item,
/// using running statistics. Handy for tracking held-out loss.
pub fn evaluate_loss(
    params: &DenoiserParams,
    items: &[TrainItem],
    seed: u64,
    batch_size: usize,
) -> Result<f64, TrainError> {
    let c = &params.config;
    let sched = NoiseSchedule::linear(c.steps, c.beta_start, c.beta_end)?;
    let mut r = rng::stream(seed, 2);
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in items.chunks(batch_size.max(1)) {
        let refs: Vec<&TrainItem> = chunk.iter().collect();
        let corr = refs.iter().map(|it| corrupt(it, c.branch, &sched, &mut r)).collect::<Result<Vec<_>, _>>()?;
        let (loss, pass, _) = batch_loss(params, &refs, &corr, false)?;
        let rows = pass.outputs.slice(s![.., 0]).len();
        total += loss * rows as f64;
        count += rows;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}
