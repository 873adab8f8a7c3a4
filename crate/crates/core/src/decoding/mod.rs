//! From denoiser output to feasible solutions: reverse chains, heatmaps,
//! greedy construction, 2-opt, and best-of-K sampling.

mod chain;
mod greedy;
mod two_opt;

pub use chain::{run_chains, run_reverse_chain, ChainOutput, StepModes};
pub use greedy::{mis_greedy_decode, ranked_edges, tsp_greedy_decode};
pub use two_opt::{two_opt, DEFAULT_MAX_PASSES, IMPROVEMENT_EPS};

use std::collections::HashMap;
use std::time::Instant;

use thiserror::Error;

use crate::denoiser::{Denoise, DenoiserError, GraphInput};
use crate::diffusion::{ContinuousMode, DiffusionError, InferenceSchedule, NoiseSchedule, ScheduleKind, StepMode};
use crate::instances::{
    dense, sparsify, IndependentSet, Instance, InstanceError, SparseGraph, Task, Tour, TspInstance,
};
use crate::rng;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("invalid heatmap: {0}")]
    InvalidHeatmap(String),
    #[error(transparent)]
    Denoiser(#[from] DenoiserError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Per-variable confidence scores in `[0, 1]`: one per directed candidate
/// edge for TSP, one per node for MIS.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub task: Task,
    /// Directed edges for TSP, empty for MIS.
    pub edges: Vec<(usize, usize)>,
    pub scores: Vec<f64>,
    index: HashMap<(usize, usize), usize>,
}

fn check_scores(scores: &[f64]) -> Result<(), DecodeError> {
    match scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        Some(i) => Err(DecodeError::InvalidHeatmap(format!("score {} at {i} outside [0, 1]", scores[i]))),
        None => Ok(()),
    }
}

impl Heatmap {
    pub fn tsp(edges: Vec<(usize, usize)>, scores: Vec<f64>) -> Result<Self, DecodeError> {
        if edges.len() != scores.len() {
            return Err(DecodeError::InvalidHeatmap(format!("{} edges but {} scores", edges.len(), scores.len())));
        }
        check_scores(&scores)?;
        let index = edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        Ok(Heatmap { task: Task::Tsp, edges, scores, index })
    }

    pub fn mis(scores: Vec<f64>) -> Result<Self, DecodeError> {
        check_scores(&scores)?;
        Ok(Heatmap { task: Task::Mis, edges: Vec::new(), scores, index: HashMap::new() })
    }

    /// One-hot heatmap of a tour over `graph`'s directed edges.
    pub fn from_tour(tour: &Tour, graph: &SparseGraph) -> Self {
        let on: std::collections::HashSet<(usize, usize)> = tour.edges().into_iter().collect();
        let edges = graph.directed_edges();
        let scores = edges.iter().map(|&(a, b)| if on.contains(&(a.min(b), a.max(b))) { 1.0 } else { 0.0 }).collect();
        Heatmap::tsp(edges, scores).expect("scores are 0 or 1")
    }

    /// `A_ij` for a directed candidate edge.
    pub fn edge_score(&self, i: usize, j: usize) -> Option<f64> {
        self.index.get(&(i, j)).map(|&k| self.scores[k])
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Candidate graph for a TSP instance: dense below `k + 1` nodes or when no
/// `k` is given, k-nearest-neighbor otherwise.
pub fn candidate_graph(instance: &TspInstance, sparse_k: Option<usize>) -> Result<SparseGraph, InstanceError> {
    match sparse_k {
        Some(k) if k + 1 < instance.n() => sparsify(instance, k),
        _ => Ok(dense(instance)),
    }
}

/// Network input for an instance plus its TSP candidate graph.
pub fn graph_input(
    instance: &Instance,
    hidden: usize,
    sparse_k: Option<usize>,
) -> Result<(GraphInput, Option<SparseGraph>), InstanceError> {
    Ok(match instance {
        Instance::Tsp(t) => {
            let g = candidate_graph(t, sparse_k)?;
            (GraphInput::tsp(t, &g, hidden), Some(g))
        }
        Instance::Mis(m) => (GraphInput::mis(m), None),
    })
}

/// A decoded solution of either task.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Tour(Tour),
    Set(IndependentSet),
}

impl Solution {
    /// Tour length or set size.
    pub fn objective(&self) -> f64 {
        match self {
            Solution::Tour(t) => t.length(),
            Solution::Set(s) => s.size() as f64,
        }
    }

    /// Strictly better than `other` (shorter tour, larger set).
    pub fn improves_on(&self, other: &Solution) -> bool {
        match (self, other) {
            (Solution::Tour(a), Solution::Tour(b)) => a.length() < b.length(),
            (Solution::Set(a), Solution::Set(b)) => a.size() > b.size(),
            _ => false,
        }
    }

    /// Node indices: tour order or sorted set members.
    pub fn indices(&self) -> &[usize] {
        match self {
            Solution::Tour(t) => t.order(),
            Solution::Set(s) => s.nodes(),
        }
    }

    /// Re-check feasibility against the instance, independent of the decoder.
    pub fn validate(&self, instance: &Instance) -> Result<(), InstanceError> {
        match (self, instance) {
            (Solution::Tour(t), Instance::Tsp(i)) => t.validate(i.coords()),
            (Solution::Set(s), Instance::Mis(g)) => s.validate(g),
            _ => Err(InstanceError::Infeasible("solution type does not match the instance".into())),
        }
    }
}

/// Inference-time settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    /// Inference steps `M`.
    pub steps: usize,
    /// Independent chains `K`.
    pub samples: usize,
    pub schedule: ScheduleKind,
    pub two_opt: bool,
    pub two_opt_passes: usize,
    pub continuous_mode: ContinuousMode,
    /// Whether discrete chains sample each intermediate state or take the
    /// posterior mode. Sampling is what makes independent chains differ.
    pub discrete_mode: StepMode,
    /// Candidate-graph neighbor count for TSP; `None` means dense.
    pub sparse_k: Option<usize>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            steps: 50,
            samples: 1,
            schedule: ScheduleKind::Linear,
            two_opt: false,
            two_opt_passes: DEFAULT_MAX_PASSES,
            continuous_mode: ContinuousMode::Ddim,
            discrete_mode: StepMode::Sample,
            sparse_k: None,
        }
    }
}

impl DecodeConfig {
    pub fn modes(&self) -> StepModes {
        StepModes { discrete: self.discrete_mode, continuous: self.continuous_mode }
    }
}

/// Wall-clock seconds spent in each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub chain: f64,
    pub decode: f64,
    pub refine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub best: Solution,
    /// Index of `best` in `candidates`.
    pub best_index: usize,
    pub candidates: Vec<Solution>,
    pub times: PhaseTimes,
}

/// Greedy decode of one heatmap, with optional 2-opt for tours.
pub fn decode_heatmap(
    heatmap: &Heatmap,
    instance: &Instance,
    graph: Option<&SparseGraph>,
    config: &DecodeConfig,
    times: &mut PhaseTimes,
) -> Result<Solution, DecodeError> {
    let start = Instant::now();
    let solution = match instance {
        Instance::Tsp(t) => {
            let g = graph.ok_or_else(|| DecodeError::Mismatch("TSP decode needs a candidate graph".into()))?;
            let tour = tsp_greedy_decode(heatmap, t, g);
            times.decode += start.elapsed().as_secs_f64();
            if config.two_opt {
                let refine = Instant::now();
                let tour = two_opt(&tour, t, config.two_opt_passes);
                times.refine += refine.elapsed().as_secs_f64();
                Solution::Tour(tour)
            } else {
                Solution::Tour(tour)
            }
        }
        Instance::Mis(g) => {
            let set = mis_greedy_decode(heatmap, g);
            times.decode += start.elapsed().as_secs_f64();
            Solution::Set(set)
        }
    };
    Ok(solution)
}

/// Run `K` reverse chains (chain `k` on stream `k` of `seed`), decode each,
/// and keep the best candidate; ties keep the lowest chain index. Seed sets
/// nest: the first `K` chains for `K' > K` are exactly the `K` chains.
pub fn multi_sample_solve(
    model: &dyn Denoise,
    sched: &NoiseSchedule,
    instance: &Instance,
    config: &DecodeConfig,
    seed: u64,
) -> Result<SolveResult, DecodeError> {
    if config.samples == 0 {
        return Err(DecodeError::Mismatch("at least one sample is required".into()));
    }
    let inf = InferenceSchedule::new(config.steps, sched.steps(), config.schedule)?;
    let (graph, sparse) = graph_input(instance, model.config().hidden, config.sparse_k)?;
    let mut times = PhaseTimes::default();
    let start = Instant::now();
    let mut rngs: Vec<rng::Rng> = (0..config.samples as u64).map(|k| rng::stream(seed, k)).collect();
    let chains = run_chains(model, sched, &inf, &graph, config.modes(), &mut rngs)?;
    times.chain = start.elapsed().as_secs_f64();
    let mut candidates = Vec::with_capacity(chains.len());
    for out in &chains {
        candidates.push(decode_heatmap(&out.heatmap, instance, sparse.as_ref(), config, &mut times)?);
    }
    let mut best_index = 0;
    for (k, c) in candidates.iter().enumerate().skip(1) {
        if c.improves_on(&candidates[best_index]) {
            best_index = k;
        }
    }
    Ok(SolveResult { best: candidates[best_index].clone(), best_index, candidates, times })
}

#[cfg(test)]
mod tests;
