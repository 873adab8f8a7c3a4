use crate::instances::{Tour, TspInstance};

/// Improvements smaller than this are treated as zero.
pub const IMPROVEMENT_EPS: f64 = 1e-12;

/// Default pass cap for [`two_opt`].
pub const DEFAULT_MAX_PASSES: usize = 100;

/// Best-improvement 2-opt. Each pass scans every pair of non-adjacent tour
/// edges, applies the single most improving segment reversal (ties to the
/// first pair found), and stops when nothing improves or after `max_passes`.
pub fn two_opt(tour: &Tour, instance: &TspInstance, max_passes: usize) -> Tour {
    let n = tour.order().len();
    let mut order = tour.order().to_vec();
    if n < 4 {
        return tour.clone();
    }
    let d = |a: usize, b: usize| instance.dist(a, b);
    let mut passes = 0;
    while passes < max_passes {
        passes += 1;
        let mut best = (-IMPROVEMENT_EPS, usize::MAX, usize::MAX);
        for i in 0..n - 2 {
            let a = order[i];
            let b = order[i + 1];
            let dab = d(a, b);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let c = order[j];
                let e = order[(j + 1) % n];
                let delta = d(a, c) + d(b, e) - dab - d(c, e);
                if delta < best.0 {
                    best = (delta, i, j);
                }
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        order[best.1 + 1..=best.2].reverse();
    }
    Tour::new(order, instance.coords()).expect("segment reversal keeps a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::generate_tsp;
    use crate::rng;
    use rand::seq::SliceRandom;

    fn square() -> TspInstance {
        TspInstance::new(0, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn uncrosses_square() {
        let inst = square();
        // A(0,0) → C(1,1) → B(1,0) → D(0,1)
        let crossed = Tour::new(vec![0, 2, 1, 3], inst.coords()).unwrap();
        assert!((crossed.length() - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
        let fixed = two_opt(&crossed, &inst, DEFAULT_MAX_PASSES);
        assert!((fixed.length() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn convex_order_is_fixed_point() {
        let n = 9;
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                [0.5 + 0.4 * a.cos(), 0.5 + 0.4 * a.sin()]
            })
            .collect();
        let inst = TspInstance::new(0, coords).unwrap();
        let tour = Tour::new((0..n).collect(), inst.coords()).unwrap();
        assert_eq!(two_opt(&tour, &inst, DEFAULT_MAX_PASSES), tour);
    }

    #[test]
    fn zero_passes_is_identity() {
        let inst = square();
        let crossed = Tour::new(vec![0, 2, 1, 3], inst.coords()).unwrap();
        assert_eq!(two_opt(&crossed, &inst, 0), crossed);
    }

    /// Enumerate every reversal explicitly, re-measuring whole tours.
    fn exhaustive_fixed_point(order: &[usize], inst: &TspInstance) -> Vec<usize> {
        let n = order.len();
        let mut cur = order.to_vec();
        loop {
            let base = crate::instances::tour_length(&cur, inst.coords());
            let mut best: Option<(f64, Vec<usize>)> = None;
            for i in 1..n {
                for j in i + 1..n {
                    if i == 1 && j == n - 1 {
                        continue;
                    }
                    let mut cand = cur.clone();
                    cand[i..=j].reverse();
                    let len = crate::instances::tour_length(&cand, inst.coords());
                    if len < base - 1e-12 && best.as_ref().is_none_or(|b| len < b.0) {
                        best = Some((len, cand));
                    }
                }
            }
            match best {
                Some((_, c)) => cur = c,
                None => return cur,
            }
        }
    }

    #[test]
    fn random_tours_reach_exhaustive_fixed_point() {
        let mut r = rng::stream(17, 0);
        for trial in 0..1000 {
            let inst = generate_tsp(10, 5000 + trial).unwrap();
            let mut order: Vec<usize> = (0..10).collect();
            order.shuffle(&mut r);
            let tour = Tour::new(order.clone(), inst.coords()).unwrap();
            let out = two_opt(&tour, &inst, usize::MAX);
            assert!(out.length() <= tour.length() + 1e-12);
            let oracle = exhaustive_fixed_point(&order, &inst);
            let oracle_len = crate::instances::tour_length(&oracle, inst.coords());
            assert!((out.length() - oracle_len).abs() < 1e-9, "trial {trial}");
            // no improving move left
            assert_eq!(two_opt(&out, &inst, 1), out);
        }
    }
}
