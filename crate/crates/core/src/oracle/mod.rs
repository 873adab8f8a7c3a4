//! Reference solvers used to label training data and to measure gaps.
//!
//! Exact solvers are capped at sizes where they stay desk-runnable; beyond
//! the caps the heuristics take over.

mod held_karp;
mod mis;

pub use held_karp::solve_tsp_exact;
pub use mis::{solve_mis_exact, solve_mis_heuristic};

use std::time::Instant;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::decoding::two_opt;
use crate::instances::{IndependentSet, Instance, InstanceError, Tour, TspInstance};
use crate::rng;

pub const MAX_EXACT_TSP_NODES: usize = 20;
pub const MAX_EXACT_MIS_NODES: usize = 60;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{solver} is capped at {max} nodes but the instance has {n}; use the heuristic oracle instead")]
    TooLarge { solver: &'static str, n: usize, max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport<S> {
    pub solution: S,
    /// Only the exhaustive/DP solvers set this.
    pub exact: bool,
    pub runtime: f64,
}

/// Best of `restarts` constructions, each polished to a 2-opt local optimum.
///
/// The first `min(restarts, n)` constructions are nearest-neighbor tours from
/// distinct start nodes in seeded random order; any further restarts begin
/// from uniformly random tours.
pub fn solve_tsp_heuristic(
    instance: &TspInstance,
    restarts: usize,
    seed: u64,
) -> Result<OracleReport<Tour>, OracleError> {
    if restarts == 0 {
        return Err(OracleError::InvalidArgument("restarts must be at least 1".into()));
    }
    let start = Instant::now();
    let n = instance.n();
    let mut rng = rng::stream(seed, 0);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.shuffle(&mut rng);
    let mut best: Option<Tour> = None;
    for r in 0..restarts {
        let order = if r < n {
            nearest_neighbor(instance, starts[r])
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        };
        let tour = Tour::new(order, instance.coords())?;
        let tour = two_opt(&tour, instance, usize::MAX);
        if best.as_ref().is_none_or(|b| tour.length() < b.length()) {
            best = Some(tour);
        }
    }
    Ok(OracleReport { solution: best.expect("restarts >= 1"), exact: false, runtime: start.elapsed().as_secs_f64() })
}

/// Nearest-neighbor construction from `start`, ties to the lower index.
pub fn nearest_neighbor(instance: &TspInstance, start: usize) -> Vec<usize> {
    let n = instance.n();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| instance.dist(cur, a).total_cmp(&instance.dist(cur, b)).then(a.cmp(&b)))
            .expect("unvisited node remains");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

/// Which oracle produced a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    Exact,
    Heuristic,
}

/// Label an instance in place: exact solver within its cap, heuristic beyond.
pub fn label_instance(instance: &mut Instance, restarts: usize, seed: u64) -> Result<LabelSource, OracleError> {
    match instance {
        Instance::Tsp(t) => {
            let report = if t.n() <= MAX_EXACT_TSP_NODES {
                solve_tsp_exact(t)?
            } else {
                solve_tsp_heuristic(t, restarts, seed)?
            };
            t.set_label(report.solution)?;
            Ok(if report.exact { LabelSource::Exact } else { LabelSource::Heuristic })
        }
        Instance::Mis(g) => {
            let report = if g.n() <= MAX_EXACT_MIS_NODES { solve_mis_exact(g)? } else { solve_mis_heuristic(g, seed) };
            let set: IndependentSet = report.solution;
            g.set_label(set)?;
            Ok(if report.exact { LabelSource::Exact } else { LabelSource::Heuristic })
        }
    }
}

/// Label a whole set in parallel. Instance `i` uses seed stream `derive(seed, i)`.
pub fn label_all(instances: &mut [Instance], restarts: usize, seed: u64) -> Result<Vec<LabelSource>, OracleError> {
    let labeled = crate::par::map_indexed(instances.len(), |i| {
        let mut inst = instances[i].clone();
        label_instance(&mut inst, restarts, rng::derive(seed, i as u64)).map(|src| (inst, src))
    });
    let mut sources = Vec::with_capacity(labeled.len());
    for (slot, result) in instances.iter_mut().zip(labeled) {
        let (inst, src) = result?;
        *slot = inst;
        sources.push(src);
    }
    Ok(sources)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::generate_tsp;

    fn square() -> TspInstance {
        TspInstance::new(0, vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn heuristic_fixes_square() {
        let r = solve_tsp_heuristic(&square(), 1, 0).unwrap();
        assert!((r.solution.length() - 4.0).abs() < 1e-12);
        assert!(!r.exact);
    }

    #[test]
    fn heuristic_never_beats_exact() {
        for seed in 0..30 {
            let inst = generate_tsp(9, seed).unwrap();
            let exact = solve_tsp_exact(&inst).unwrap().solution.length();
            let heur = solve_tsp_heuristic(&inst, 3, seed).unwrap().solution.length();
            assert!(heur >= exact - 1e-12);
        }
    }

    #[test]
    fn heuristic_calibration_against_held_karp() {
        let mut within = 0;
        for seed in 0..100 {
            let inst = generate_tsp(12, 1000 + seed).unwrap();
            let exact = solve_tsp_exact(&inst).unwrap().solution.length();
            let heur = solve_tsp_heuristic(&inst, 20, seed).unwrap().solution.length();
            if (heur - exact) / exact <= 0.05 {
                within += 1;
            }
        }
        assert!(within >= 95, "{within}/100 within 5%");
    }

    #[test]
    fn nearest_neighbor_visits_all() {
        let inst = generate_tsp(15, 2).unwrap();
        let order = nearest_neighbor(&inst, 4);
        assert_eq!(order[0], 4);
        assert!(Tour::new(order, inst.coords()).is_ok());
    }

    #[test]
    fn labeling_uses_exact_within_cap() {
        let mut set = vec![
            Instance::Tsp(generate_tsp(8, 1).unwrap()),
            Instance::Tsp(generate_tsp(25, 2).unwrap()),
            Instance::Mis(crate::instances::generate_er(12, 12, 0.3, 3).unwrap()),
        ];
        let sources = label_all(&mut set, 4, 9).unwrap();
        assert_eq!(sources, vec![LabelSource::Exact, LabelSource::Heuristic, LabelSource::Exact]);
        assert!(set.iter().all(Instance::is_labeled));
    }
}
