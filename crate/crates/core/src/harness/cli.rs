//! The `gdco` command-line tool.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use super::{
    emit_plot_data, evaluate, export_heatmaps, format_heatmap, format_solution, solve_all, sweep, write_report,
    write_times, EvalReport, HarnessError, ModelSolver, SEED_GENERATE, SEED_LABEL,
};
use crate::decoding::{DecodeConfig, DEFAULT_MAX_PASSES};
use crate::denoiser::DenoiserParams;
use crate::diffusion::{Branch, ContinuousMode, ScheduleKind, StepMode};
use crate::instances::{generate_er_set, generate_tsp_set, load_instances, save_instances, Instance, Task};
use crate::oracle::{label_all, LabelSource};
use crate::rng;
use crate::training::{load_model, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "gdco", version, about = "Denoising-diffusion solvers for TSP and MIS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random instances.
    Generate(GenerateArgs),
    /// Attach reference solutions to an instance file.
    Label(LabelArgs),
    /// Train a denoiser.
    Train(TrainArgs),
    /// Solve instances with a trained model and write one solution per line.
    Solve(SolveArgs),
    /// Solve instances and report objective and gap per instance.
    Eval(EvalArgs),
    /// Evaluate a grid of inference steps by samples.
    Sweep(SweepArgs),
    /// Write the final heatmap of one reverse chain per instance.
    ExportHeatmap(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Problem: tsp or mis.
    #[arg(long)]
    pub task: Task,
    /// Number of instances.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Node count (lower bound for mis when --n-max is given).
    #[arg(long)]
    pub n: usize,
    /// Upper bound of the mis node count (defaults to --n).
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Edge probability of the mis random graphs.
    #[arg(long, default_value_t = 0.3)]
    pub p: f64,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output instance file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Input instance file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output instance file with labels.
    #[arg(long)]
    pub out: PathBuf,
    /// Random restarts of the heuristic oracle for instances too large for the exact one.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training config file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Problem; overrides the config.
    #[arg(long)]
    pub task: Option<Task>,
    /// Diffusion branch: discrete or continuous; overrides the config.
    #[arg(long)]
    pub branch: Option<Branch>,
    /// Labeled training set; overrides `train` in the config.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Checkpoint path; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Decoding flags shared by the model-driven subcommands.
#[derive(Debug, Args, Clone)]
pub struct DecodeFlags {
    /// Inference timestep spacing: linear or cosine.
    #[arg(long, default_value = "linear")]
    pub schedule: ScheduleKind,
    /// Refine tours with 2-opt.
    #[arg(long)]
    pub two_opt: bool,
    /// Pass cap of 2-opt.
    #[arg(long, default_value_t = DEFAULT_MAX_PASSES)]
    pub two_opt_passes: usize,
    /// Continuous reverse step: ddim or ddpm.
    #[arg(long, default_value = "ddim")]
    pub mode: ContinuousMode,
    /// Discrete reverse step: sample or argmax.
    #[arg(long, default_value = "sample")]
    pub discrete_step: StepMode,
    /// Neighbors per node in the tsp candidate graph (dense when absent).
    #[arg(long)]
    pub sparse_k: Option<usize>,
    /// Expected problem; checked against the checkpoint.
    #[arg(long)]
    pub task: Option<Task>,
    /// Expected branch; checked against the checkpoint.
    #[arg(long)]
    pub branch: Option<Branch>,
}

impl DecodeFlags {
    fn config(&self, steps: usize, samples: usize) -> DecodeConfig {
        DecodeConfig {
            steps,
            samples,
            schedule: self.schedule,
            two_opt: self.two_opt,
            two_opt_passes: self.two_opt_passes,
            continuous_mode: self.mode,
            discrete_mode: self.discrete_step,
            sparse_k: self.sparse_k,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Instance file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Solution file.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-instance report CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Inference steps M.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Independent samples K; the best is kept.
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled instance file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report CSV `seed,id,objective,gap`.
    #[arg(long)]
    pub out: PathBuf,
    /// Inference steps M.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Independent samples K; the best is kept.
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of seeds (seed, seed + 1, ...).
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Also write plot CSV `x,series,value` (instance id, seed, gap).
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Also write per-phase wall-clock times CSV.
    #[arg(long)]
    pub times: Option<PathBuf>,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Instance file (labeled for gaps).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Plot CSV `x,series,value` (steps, samples, mean gap).
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated inference step counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub steps: Vec<usize>,
    /// Comma-separated sample counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub samples: Vec<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Instance file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Heatmap file.
    #[arg(long)]
    pub out: PathBuf,
    /// Inference steps M.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<(), HarnessError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in lines {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Load a checkpoint and the instance file it will run on, checking that
/// they agree with each other and with any `--task` / `--branch` given.
fn load_inputs(
    model: &Path,
    input: &Path,
    flags: &DecodeFlags,
) -> Result<(DenoiserParams, Vec<Instance>), HarnessError> {
    let params = load_model(model)?;
    let c = &params.config;
    if let Some(task) = flags.task.filter(|&t| t != c.task) {
        return Err(HarnessError::Usage(format!("--task {task} but the checkpoint solves {}", c.task)));
    }
    if let Some(branch) = flags.branch.filter(|&b| b != c.branch) {
        return Err(HarnessError::Usage(format!("--branch {branch} but the checkpoint uses {}", c.branch)));
    }
    let instances = load_instances(input)?;
    if let Some(bad) = instances.iter().find(|i| i.task() != c.task) {
        return Err(HarnessError::Usage(format!(
            "instance {} is {}, the checkpoint solves {}",
            bad.id(),
            bad.task(),
            c.task
        )));
    }
    Ok((params, instances))
}

fn print_times(report: &EvalReport) {
    let t = report.phase_totals();
    eprintln!(
        "time: total {:.3}s (chain {:.3}s, decode {:.3}s, refine {:.3}s)",
        report.total_seconds, t.chain, t.decode, t.refine
    );
}

/// Run one parsed command. Deterministic results go to files and stdout;
/// wall-clock times go to stderr only.
pub fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Generate(a) => {
            let seed = rng::derive(a.seed, SEED_GENERATE);
            let instances: Vec<Instance> = match a.task {
                Task::Tsp => generate_tsp_set(a.count, a.n, seed)?.into_iter().map(Instance::Tsp).collect(),
                Task::Mis => generate_er_set(a.count, a.n, a.n_max.unwrap_or(a.n), a.p, seed)?
                    .into_iter()
                    .map(Instance::Mis)
                    .collect(),
            };
            save_instances(&a.out, &instances)?;
            println!("wrote {} {} instances to {}", instances.len(), a.task, a.out.display());
        }
        Command::Label(a) => {
            let mut instances = load_instances(&a.input)?;
            let sources = label_all(&mut instances, a.restarts, rng::derive(a.seed, SEED_LABEL))?;
            save_instances(&a.out, &instances)?;
            let exact = sources.iter().filter(|s| **s == LabelSource::Exact).count();
            println!("labeled {} instances ({exact} exact, {} heuristic)", sources.len(), sources.len() - exact);
        }
        Command::Train(a) => {
            let mut cfg = match (&a.config, a.task) {
                (Some(path), _) => TrainConfig::load(path)?,
                (None, Some(task)) => TrainConfig::new(task, a.branch.unwrap_or(Branch::Discrete)),
                (None, None) => return Err(HarnessError::Usage("train needs --config or --task".into())),
            };
            if let Some(t) = a.task {
                cfg.task = t;
            }
            if let Some(b) = a.branch {
                cfg.branch = b;
            }
            if let Some(p) = a.input {
                cfg.train = Some(p);
            }
            if let Some(p) = a.out {
                cfg.out = Some(p);
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if cfg.out.is_none() {
                return Err(HarnessError::Usage(
                    "train needs an output checkpoint (--out or `out` in the config)".into(),
                ));
            }
            let start = Instant::now();
            let state = crate::training::run(&cfg)?;
            eprintln!("time: {:.3}s", start.elapsed().as_secs_f64());
            let out = cfg.out.as_ref().expect("checked above");
            println!("trained {} steps over {} epochs; wrote {}", state.step, state.epoch, out.display());
        }
        Command::Solve(a) => {
            let (params, instances) = load_inputs(&a.model, &a.input, &a.decode)?;
            let solver = ModelSolver::new(&params, a.decode.config(a.steps, a.samples))?;
            let solved = solve_all(&solver, &instances, a.seed)?;
            write_lines(&a.out, solved.iter().map(|s| format_solution(s.record.id, &s.solution)))?;
            let report = EvalReport::new(params.config.task, solved.into_iter().map(|s| s.record).collect());
            if let Some(p) = &a.report {
                write_report(&report, p)?;
            }
            println!("{}", report.summary());
            print_times(&report);
        }
        Command::Eval(a) => {
            let (params, instances) = load_inputs(&a.model, &a.input, &a.decode)?;
            if a.seeds == 0 {
                return Err(HarnessError::Usage("--seeds must be at least 1".into()));
            }
            let solver = ModelSolver::new(&params, a.decode.config(a.steps, a.samples))?;
            let seeds: Vec<u64> = (0..a.seeds).map(|i| a.seed.wrapping_add(i)).collect();
            let report = evaluate(&solver, &instances, &seeds)?;
            write_report(&report, &a.out)?;
            if let Some(p) = &a.plot {
                emit_plot_data(&report, p)?;
            }
            if let Some(p) = &a.times {
                write_times(&report, p)?;
            }
            println!("{}", report.summary());
            print_times(&report);
        }
        Command::Sweep(a) => {
            let (params, instances) = load_inputs(&a.model, &a.input, &a.decode)?;
            let start = Instant::now();
            let cells = sweep(&params, &instances, &a.steps, &a.samples, a.decode.config(1, 1), a.seed)?;
            emit_plot_data(cells.as_slice(), &a.out)?;
            for c in &cells {
                let gap = c.mean_gap.map_or_else(|| "n/a".into(), |g| format!("{g:.4}%"));
                println!(
                    "steps={} samples={} mean_objective={:.6} mean_gap={gap}",
                    c.steps, c.samples, c.mean_objective
                );
            }
            eprintln!("time: {:.3}s", start.elapsed().as_secs_f64());
        }
        Command::ExportHeatmap(a) => {
            let (params, instances) = load_inputs(&a.model, &a.input, &a.decode)?;
            let maps = export_heatmaps(&params, &instances, &a.decode.config(a.steps, 1), a.seed)?;
            write_lines(&a.out, maps.iter().map(|(id, h)| format_heatmap(*id, h)))?;
            println!("wrote {} heatmaps to {}", maps.len(), a.out.display());
        }
    }
    Ok(())
}

/// Parse `args` (program name first) and run. Usage errors exit with 2,
/// runtime errors print one `error:` line and exit with 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
