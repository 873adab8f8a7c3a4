// Held-Karp bitmask dynamic program. Node 0 is the fixed start; masks range
// over nodes 1..n, and cost[mask * m + j] is the shortest path from 0 through
// exactly `mask` ending at node j + 1.

use std::time::Instant;

use super::{OracleError, OracleReport, MAX_EXACT_TSP_NODES};
use crate::instances::{Tour, TspInstance};

pub fn solve_tsp_exact(instance: &TspInstance) -> Result<OracleReport<Tour>, OracleError> {
    let n = instance.n();
    if n > MAX_EXACT_TSP_NODES {
        return Err(OracleError::TooLarge { solver: "Held-Karp", n, max: MAX_EXACT_TSP_NODES });
    }
    let start = Instant::now();
    let m = n - 1;
    let full = (1usize << m) - 1;
    let d = |a: usize, b: usize| instance.dist(a, b);

    let mut cost = vec![f64::INFINITY; (full + 1) * m];
    let mut parent = vec![u8::MAX; (full + 1) * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = d(0, j + 1);
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = cost[mask * m + j];
            if !here.is_finite() {
                continue;
            }
            let mut rest = full & !mask;
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let next = mask | (1 << k);
                let cand = here + d(j + 1, k + 1);
                let slot = next * m + k;
                if cand < cost[slot] {
                    cost[slot] = cand;
                    parent[slot] = j as u8;
                }
            }
        }
    }

    let (mut last, _) = (0..m)
        .map(|j| (j, cost[full * m + j] + d(j + 1, 0)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("n >= 2");
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    loop {
        order.push(last + 1);
        let p = parent[mask * m + last];
        mask &= !(1 << last);
        if p == u8::MAX {
            break;
        }
        last = p as usize;
    }
    order.push(0);
    order.reverse();
    let tour = Tour::new(order, instance.coords())?;
    Ok(OracleReport { solution: tour, exact: true, runtime: start.elapsed().as_secs_f64() })
}
