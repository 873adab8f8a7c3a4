use std::time::Instant;

use rand::Rng as _;

use super::{OracleError, OracleReport, MAX_EXACT_MIS_NODES};
use crate::instances::{IndependentSet, MisInstance};
use crate::rng;

/// Maximum independent set by branch and bound over 64-bit vertex masks.
///
/// Branches on the highest-degree candidate (include first, then exclude);
/// prunes with a greedy clique-cover bound, since an independent set takes
/// at most one vertex from each clique.
pub fn solve_mis_exact(instance: &MisInstance) -> Result<OracleReport<IndependentSet>, OracleError> {
    let n = instance.n();
    if n > MAX_EXACT_MIS_NODES {
        return Err(OracleError::TooLarge { solver: "MIS branch-and-bound", n, max: MAX_EXACT_MIS_NODES });
    }
    let start = Instant::now();
    let adj: Vec<u64> = (0..n).map(|v| instance.neighbors(v).iter().fold(0u64, |m, &u| m | (1 << u))).collect();
    let warm = solve_mis_heuristic(instance, 0).solution;
    let mut search =
        Search { adj, best: warm.nodes().iter().fold(0u64, |m, &v| m | (1 << v)), best_size: warm.size() as u32 };
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    search.run(all, 0, 0);
    let nodes = (0..n).filter(|&v| search.best & (1 << v) != 0).collect();
    let set = IndependentSet::new(nodes, instance)?;
    Ok(OracleReport { solution: set, exact: true, runtime: start.elapsed().as_secs_f64() })
}

struct Search {
    adj: Vec<u64>,
    best: u64,
    best_size: u32,
}

impl Search {
    fn run(&mut self, cand: u64, chosen: u64, size: u32) {
        if cand == 0 {
            if size > self.best_size {
                self.best_size = size;
                self.best = chosen;
            }
            return;
        }
        if size + self.clique_cover(cand) <= self.best_size {
            return;
        }
        let mut pick = 0usize;
        let mut pick_deg = 0u32;
        let mut rest = cand;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let deg = (self.adj[v] & cand).count_ones();
            if deg > pick_deg {
                pick = v;
                pick_deg = deg;
            }
        }
        if pick_deg == 0 {
            // only isolated vertices remain: take them all
            let total = size + cand.count_ones();
            if total > self.best_size {
                self.best_size = total;
                self.best = chosen | cand;
            }
            return;
        }
        let bit = 1u64 << pick;
        self.run(cand & !bit & !self.adj[pick], chosen | bit, size + 1);
        self.run(cand & !bit, chosen, size);
    }

    fn clique_cover(&self, cand: u64) -> u32 {
        let mut rem = cand;
        let mut cliques = 0;
        while rem != 0 {
            let v = rem.trailing_zeros() as usize;
            rem &= !(1u64 << v);
            let mut grow = rem & self.adj[v];
            while grow != 0 {
                let u = grow.trailing_zeros() as usize;
                rem &= !(1u64 << u);
                grow &= self.adj[u];
            }
            cliques += 1;
        }
        cliques
    }
}

/// Min-degree greedy: repeatedly take a vertex of minimum remaining degree
/// (ties broken uniformly at random from `seed`) and delete its neighborhood.
/// The result is maximal but not necessarily maximum.
pub fn solve_mis_heuristic(instance: &MisInstance, seed: u64) -> OracleReport<IndependentSet> {
    let start = Instant::now();
    let n = instance.n();
    let mut rng = rng::stream(seed, 0);
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|v| instance.degree(v)).collect();
    let mut chosen = Vec::new();
    let mut ties = Vec::new();
    while let Some(min_deg) = (0..n).filter(|&v| alive[v]).map(|v| degree[v]).min() {
        ties.clear();
        ties.extend((0..n).filter(|&v| alive[v] && degree[v] == min_deg));
        let v = ties[rng.random_range(0..ties.len())];
        chosen.push(v);
        let mut removed = vec![v];
        removed.extend(instance.neighbors(v).iter().copied().filter(|&u| alive[u]));
        for &r in &removed {
            alive[r] = false;
        }
        for &r in &removed {
            for &w in instance.neighbors(r) {
                if alive[w] {
                    degree[w] -= 1;
                }
            }
        }
    }
    let set = IndependentSet::new(chosen, instance).expect("greedy never picks adjacent vertices");
    OracleReport { solution: set, exact: false, runtime: start.elapsed().as_secs_f64() }
}
