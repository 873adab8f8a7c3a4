//! Evaluation and experiment plumbing: gap metrics, per-instance evaluation
//! reports, steps-by-samples sweeps, plot CSVs, and the command-line tool.

pub mod cli;
mod files;

pub use files::{format_heatmap, format_solution, write_report, write_times};

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::decoding::{
    graph_input, multi_sample_solve, run_reverse_chain, DecodeConfig, DecodeError, Heatmap, PhaseTimes, Solution,
};
use crate::denoiser::Denoise;
use crate::diffusion::{InferenceSchedule, NoiseSchedule};
use crate::instances::{Instance, InstanceError, Task};
use crate::oracle::{label_instance, OracleError};
use crate::training::TrainError;
use crate::{par, rng};

/// Labels mixed into the user seed to get independent streams.
pub const SEED_GENERATE: u64 = 1;
pub const SEED_LABEL: u64 = 2;
pub const SEED_CHAIN: u64 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("reference objective must be positive, got {0}")]
    InvalidReference(f64),
    #[error("instance {id}: infeasible solution: {message}")]
    Infeasible { id: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Percent by which a tour is longer than the reference.
pub fn gap_tsp(pred_length: f64, ref_length: f64) -> Result<f64, HarnessError> {
    if !(ref_length > 0.0) {
        return Err(HarnessError::InvalidReference(ref_length));
    }
    Ok((pred_length - ref_length) / ref_length * 100.0)
}

/// Percent by which a set is smaller than the reference.
pub fn gap_mis(pred_size: f64, ref_size: f64) -> Result<f64, HarnessError> {
    if !(ref_size > 0.0) {
        return Err(HarnessError::InvalidReference(ref_size));
    }
    Ok((ref_size - pred_size) / ref_size * 100.0)
}

/// Gap of `pred` against the instance label, `None` when unlabeled.
pub fn instance_gap(instance: &Instance, pred: f64) -> Result<Option<f64>, HarnessError> {
    match instance {
        Instance::Tsp(t) => t.label().map(|l| gap_tsp(pred, l.length())).transpose(),
        Instance::Mis(g) => g.label().map(|l| gap_mis(pred, l.size() as f64)).transpose(),
    }
}

/// Anything that turns an instance into a solution.
pub trait Solver: Sync {
    fn solve(&self, instance: &Instance, seed: u64) -> Result<(Solution, PhaseTimes), HarnessError>;
}

/// A trained denoiser with its decoding settings.
pub struct ModelSolver<'a> {
    pub model: &'a dyn Denoise,
    pub sched: NoiseSchedule,
    pub config: DecodeConfig,
}

impl<'a> ModelSolver<'a> {
    pub fn new(model: &'a dyn Denoise, config: DecodeConfig) -> Result<Self, HarnessError> {
        let c = model.config();
        let sched = NoiseSchedule::linear(c.steps, c.beta_start, c.beta_end).map_err(DecodeError::from)?;
        Ok(ModelSolver { model, sched, config })
    }
}

impl Solver for ModelSolver<'_> {
    fn solve(&self, instance: &Instance, seed: u64) -> Result<(Solution, PhaseTimes), HarnessError> {
        let r = multi_sample_solve(self.model, &self.sched, instance, &self.config, seed)?;
        Ok((r.best, r.times))
    }
}

/// The reference solvers used for labeling (exact where tractable).
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleSolver {
    pub restarts: usize,
}

impl Solver for OracleSolver {
    fn solve(&self, instance: &Instance, seed: u64) -> Result<(Solution, PhaseTimes), HarnessError> {
        let start = Instant::now();
        let mut copy = instance.clone();
        label_instance(&mut copy, self.restarts, seed)?;
        let solution = match copy {
            Instance::Tsp(t) => Solution::Tour(t.label().expect("just labeled").clone()),
            Instance::Mis(g) => Solution::Set(g.label().expect("just labeled").clone()),
        };
        let times = PhaseTimes { decode: start.elapsed().as_secs_f64(), ..PhaseTimes::default() };
        Ok((solution, times))
    }
}

/// One solved instance under one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub seed: u64,
    pub id: usize,
    /// Tour length or set size.
    pub objective: f64,
    pub gap: Option<f64>,
    pub times: PhaseTimes,
    /// Wall-clock seconds for the whole instance.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub records: Vec<EvalRecord>,
    pub mean_objective: f64,
    /// Mean gap over records that have one; `None` when no record does.
    pub mean_gap: Option<f64>,
    pub total_seconds: f64,
}

impl EvalReport {
    pub fn new(task: Task, records: Vec<EvalRecord>) -> Self {
        let n = records.len().max(1) as f64;
        let mean_objective = records.iter().map(|r| r.objective).sum::<f64>() / n;
        let gaps: Vec<f64> = records.iter().filter_map(|r| r.gap).collect();
        let mean_gap = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
        let total_seconds = records.iter().map(|r| r.seconds).sum();
        EvalReport { task, records, mean_objective, mean_gap, total_seconds }
    }

    /// Sum of per-phase times across records.
    pub fn phase_totals(&self) -> PhaseTimes {
        self.records.iter().fold(PhaseTimes::default(), |acc, r| PhaseTimes {
            chain: acc.chain + r.times.chain,
            decode: acc.decode + r.times.decode,
            refine: acc.refine + r.times.refine,
        })
    }

    /// Deterministic one-line summary (no timings).
    pub fn summary(&self) -> String {
        let what = match self.task {
            Task::Tsp => "mean_length",
            Task::Mis => "mean_size",
        };
        let gap = self.mean_gap.map_or_else(|| "n/a".to_string(), |g| format!("{g:.4}%"));
        format!("instances={} {what}={:.6} mean_gap={gap}", self.records.len(), self.mean_objective)
    }
}

/// A validated solution and its metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub record: EvalRecord,
    pub solution: Solution,
}

/// Solve every instance once under `seed` and re-validate each solution
/// independently of the decoder. Instance `id` gets the solver seed
/// `derive(derive(seed, SEED_CHAIN), id)`. Any infeasible solution aborts
/// with that instance's id.
pub fn solve_all(solver: &dyn Solver, instances: &[Instance], seed: u64) -> Result<Vec<Solved>, HarnessError> {
    let chain_seed = rng::derive(seed, SEED_CHAIN);
    par::map_slice(instances, |inst| -> Result<Solved, HarnessError> {
        let start = Instant::now();
        let (solution, times) = solver.solve(inst, rng::derive(chain_seed, inst.id() as u64))?;
        let seconds = start.elapsed().as_secs_f64();
        let matches_task =
            matches!((&solution, inst), (Solution::Tour(_), Instance::Tsp(_)) | (Solution::Set(_), Instance::Mis(_)));
        if !matches_task {
            return Err(HarnessError::Infeasible {
                id: inst.id(),
                message: "solution kind does not match the task".into(),
            });
        }
        solution.validate(inst).map_err(|e| HarnessError::Infeasible { id: inst.id(), message: e.to_string() })?;
        let objective = solution.objective();
        let record = EvalRecord { seed, id: inst.id(), objective, gap: instance_gap(inst, objective)?, times, seconds };
        Ok(Solved { record, solution })
    })
    .into_iter()
    .collect()
}

fn common_task(instances: &[Instance]) -> Result<Task, HarnessError> {
    let task = match instances.first() {
        Some(i) => i.task(),
        None => return Err(HarnessError::Usage("no instances given".into())),
    };
    if let Some(bad) = instances.iter().find(|i| i.task() != task) {
        return Err(HarnessError::Usage(format!("instance {} is {}, expected {task}", bad.id(), bad.task())));
    }
    Ok(task)
}

/// Solve every instance under every seed and collect metrics; see [`solve_all`].
pub fn evaluate(solver: &dyn Solver, instances: &[Instance], seeds: &[u64]) -> Result<EvalReport, HarnessError> {
    let task = common_task(instances)?;
    if seeds.is_empty() {
        return Err(HarnessError::Usage("at least one seed is required".into()));
    }
    let mut records = Vec::with_capacity(instances.len() * seeds.len());
    for &seed in seeds {
        records.extend(solve_all(solver, instances, seed)?.into_iter().map(|s| s.record));
    }
    Ok(EvalReport::new(task, records))
}

/// One `(steps, samples)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub steps: usize,
    pub samples: usize,
    pub mean_objective: f64,
    pub mean_gap: Option<f64>,
    pub seconds: f64,
}

/// Evaluate every `(M, K)` combination with `base` otherwise unchanged, in
/// row-major order over `steps` then `samples`.
pub fn sweep(
    model: &dyn Denoise,
    instances: &[Instance],
    steps: &[usize],
    samples: &[usize],
    base: DecodeConfig,
    seed: u64,
) -> Result<Vec<SweepCell>, HarnessError> {
    let mut cells = Vec::with_capacity(steps.len() * samples.len());
    for &m in steps {
        for &k in samples {
            let solver = ModelSolver::new(model, DecodeConfig { steps: m, samples: k, ..base })?;
            let report = evaluate(&solver, instances, &[seed])?;
            cells.push(SweepCell {
                steps: m,
                samples: k,
                mean_objective: report.mean_objective,
                mean_gap: report.mean_gap,
                seconds: report.total_seconds,
            });
        }
    }
    Ok(cells)
}

/// Final heatmap of one reverse chain per instance: the same chain that
/// [`solve_all`] runs first for that instance and seed.
pub fn export_heatmaps(
    model: &dyn Denoise,
    instances: &[Instance],
    config: &DecodeConfig,
    seed: u64,
) -> Result<Vec<(usize, Heatmap)>, HarnessError> {
    let c = model.config();
    let sched = NoiseSchedule::linear(c.steps, c.beta_start, c.beta_end).map_err(DecodeError::from)?;
    let inf = InferenceSchedule::new(config.steps, c.steps, config.schedule).map_err(DecodeError::from)?;
    par::map_slice(instances, |inst| -> Result<(usize, Heatmap), HarnessError> {
        let (graph, _) = graph_input(inst, c.hidden, config.sparse_k)?;
        let mut r = rng::stream(rng::derive(rng::derive(seed, SEED_CHAIN), inst.id() as u64), 0);
        let out = run_reverse_chain(model, &sched, &inf, &graph, config.modes(), &mut r)?;
        Ok((inst.id(), out.heatmap))
    })
    .into_iter()
    .collect()
}

/// Rows of an `x,series,value` plot CSV.
pub trait PlotData {
    fn plot_rows(&self) -> Vec<[f64; 3]>;
}

/// Sweep cells: `x` = inference steps, `series` = samples, `value` = mean
/// gap (mean objective when the set is unlabeled).
impl PlotData for [SweepCell] {
    fn plot_rows(&self) -> Vec<[f64; 3]> {
        self.iter().map(|c| [c.steps as f64, c.samples as f64, c.mean_gap.unwrap_or(c.mean_objective)]).collect()
    }
}

/// Evaluation records: `x` = instance id, `series` = seed, `value` = gap
/// (objective when unlabeled).
impl PlotData for EvalReport {
    fn plot_rows(&self) -> Vec<[f64; 3]> {
        self.records.iter().map(|r| [r.id as f64, r.seed as f64, r.gap.unwrap_or(r.objective)]).collect()
    }
}

pub const PLOT_HEADER: [&str; 3] = ["x", "series", "value"];

/// Write `data` as a CSV with header `x,series,value`.
pub fn emit_plot_data<P: PlotData + ?Sized>(data: &P, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PLOT_HEADER)?;
    for row in data.plot_rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
