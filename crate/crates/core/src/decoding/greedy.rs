use std::cmp::Ordering;

use super::Heatmap;
use crate::instances::{IndependentSet, MisInstance, SparseGraph, Tour, TspInstance};

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Undirected candidate edges `(u, v)` with their ranking key
/// `(A_uv + A_vu) / ‖c_u − c_v‖`, sorted best first. Coincident endpoints
/// rank as `+∞`; ties go to the lexicographically smaller edge.
pub fn ranked_edges(heatmap: &Heatmap, instance: &TspInstance, graph: &SparseGraph) -> Vec<(usize, usize, f64)> {
    let mut ranked: Vec<(usize, usize, f64)> = graph
        .undirected_edges()
        .into_iter()
        .map(|(u, v)| {
            let score = heatmap.edge_score(u, v).unwrap_or(0.0) + heatmap.edge_score(v, u).unwrap_or(0.0);
            let dist = instance.dist(u, v);
            let key = if dist > 0.0 { score / dist } else { f64::INFINITY };
            (u, v, key)
        })
        .collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    ranked
}

/// Greedy edge insertion over the ranked candidates: an edge goes in when
/// both endpoints still have degree below 2 and it does not close a cycle
/// early. Fragments left over are joined nearest-endpoint first, using
/// non-candidate edges if needed, and the tour is closed.
pub fn tsp_greedy_decode(heatmap: &Heatmap, instance: &TspInstance, graph: &SparseGraph) -> Tour {
    let n = instance.n();
    if n <= 3 {
        return Tour::new((0..n).collect(), instance.coords()).expect("identity permutation");
    }
    let mut degree = vec![0u8; n];
    let mut adj = vec![Vec::with_capacity(2); n];
    let mut sets = DisjointSet::new(n);
    let mut placed = 0;
    let mut add = |u: usize, v: usize, degree: &mut Vec<u8>, sets: &mut DisjointSet, placed: &mut usize| {
        degree[u] += 1;
        degree[v] += 1;
        adj[u].push(v);
        adj[v].push(u);
        sets.union(u, v);
        *placed += 1;
    };

    for (u, v, _) in ranked_edges(heatmap, instance, graph) {
        if placed == n {
            break;
        }
        if degree[u] >= 2 || degree[v] >= 2 {
            continue;
        }
        if sets.find(u) == sets.find(v) && placed != n - 1 {
            continue;
        }
        add(u, v, &mut degree, &mut sets, &mut placed);
    }

    // join fragments by nearest open endpoints
    while placed < n - 1 {
        let open: Vec<usize> = (0..n).filter(|&i| degree[i] < 2).collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for (ai, &a) in open.iter().enumerate() {
            for &b in &open[ai + 1..] {
                if sets.find(a) == sets.find(b) {
                    continue;
                }
                let d = instance.dist(a, b);
                if best.is_none_or(|(bd, _, _)| d.total_cmp(&bd) == Ordering::Less) {
                    best = Some((d, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two fragments remain");
        add(a, b, &mut degree, &mut sets, &mut placed);
    }
    if placed == n - 1 {
        let ends: Vec<usize> = (0..n).filter(|&i| degree[i] < 2).collect();
        debug_assert_eq!(ends.len(), 2);
        add(ends[0], ends[1], &mut degree, &mut sets, &mut placed);
    }

    let mut order = Vec::with_capacity(n);
    let (mut prev, mut cur) = (usize::MAX, 0);
    for _ in 0..n {
        order.push(cur);
        let next = if adj[cur][0] != prev { adj[cur][0] } else { adj[cur][1] };
        prev = cur;
        cur = next;
    }
    Tour::new(order, instance.coords()).expect("greedy insertion yields a Hamiltonian cycle")
}

/// Visit nodes by descending score (ties to the lower index) and keep each
/// one that has no kept neighbor.
pub fn mis_greedy_decode(heatmap: &Heatmap, instance: &MisInstance) -> IndependentSet {
    let n = instance.n();
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.sort_by(|&a, &b| heatmap.scores[b].total_cmp(&heatmap.scores[a]).then(a.cmp(&b)));
    let mut taken = vec![false; n];
    let mut blocked = vec![false; n];
    for v in nodes {
        if blocked[v] {
            continue;
        }
        taken[v] = true;
        for &w in instance.neighbors(v) {
            blocked[w] = true;
        }
    }
    let set = (0..n).filter(|&v| taken[v]).collect();
    IndependentSet::new(set, instance).expect("greedy keeps independence")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{dense, generate_er, generate_tsp, sparsify};
    use crate::oracle::solve_tsp_exact;
    use crate::rng;
    use rand::Rng;

    fn random_heatmap(graph: &SparseGraph, r: &mut impl Rng) -> Heatmap {
        let edges = graph.directed_edges();
        let scores = edges.iter().map(|_| r.random::<f64>()).collect();
        Heatmap::tsp(edges, scores).unwrap()
    }

    /// Independent simulator: re-scan the whole candidate list after each
    /// insertion and take the first admissible edge.
    fn simulate_greedy(heatmap: &Heatmap, inst: &TspInstance, graph: &SparseGraph) -> Vec<(usize, usize)> {
        let n = inst.n();
        let mut cands: Vec<((usize, usize), f64)> = graph
            .undirected_edges()
            .into_iter()
            .map(|(u, v)| {
                let s = heatmap.edge_score(u, v).unwrap() + heatmap.edge_score(v, u).unwrap();
                ((u, v), s / inst.dist(u, v))
            })
            .collect();
        cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        let component = |chosen: &[(usize, usize)], start: usize| {
            let mut seen = vec![start];
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &(a, b) in chosen {
                    let other = if a == x {
                        b
                    } else if b == x {
                        a
                    } else {
                        continue;
                    };
                    if !seen.contains(&other) {
                        seen.push(other);
                        stack.push(other);
                    }
                }
            }
            seen
        };
        loop {
            let deg = |v: usize, chosen: &[(usize, usize)]| chosen.iter().filter(|&&(a, b)| a == v || b == v).count();
            let pick = cands.iter().find(|((u, v), _)| {
                !chosen.contains(&(*u, *v))
                    && deg(*u, &chosen) < 2
                    && deg(*v, &chosen) < 2
                    && (!component(&chosen, *u).contains(v) || chosen.len() == n - 1)
            });
            match pick {
                Some(((u, v), _)) => chosen.push((*u, *v)),
                None => break,
            }
        }
        chosen.sort();
        chosen
    }

    #[test]
    fn matches_step_by_step_simulator() {
        let mut r = rng::stream(2, 0);
        for trial in 0..300 {
            let inst = generate_tsp(6, trial).unwrap();
            let graph = dense(&inst);
            let heatmap = random_heatmap(&graph, &mut r);
            let tour = tsp_greedy_decode(&heatmap, &inst, &graph);
            let mut edges = tour.edges();
            edges.sort();
            assert_eq!(edges, simulate_greedy(&heatmap, &inst, &graph), "trial {trial}");
        }
    }

    #[test]
    fn one_hot_oracle_tour_is_reproduced() {
        for seed in 0..30 {
            let inst = generate_tsp(9, seed).unwrap();
            let opt = solve_tsp_exact(&inst).unwrap().solution;
            let graph = dense(&inst);
            let heatmap = Heatmap::from_tour(&opt, &graph);
            let tour = tsp_greedy_decode(&heatmap, &inst, &graph);
            assert!(tour.same_cycle(&opt));
        }
    }

    #[test]
    fn triangle_is_forced() {
        let inst = generate_tsp(3, 1).unwrap();
        let graph = dense(&inst);
        let heatmap = Heatmap::tsp(graph.directed_edges(), vec![0.3; 6]).unwrap();
        let tour = tsp_greedy_decode(&heatmap, &inst, &graph);
        assert_eq!(tour.order().len(), 3);
        tour.validate(inst.coords()).unwrap();
    }

    #[test]
    fn sparse_fallback_completes() {
        let mut r = rng::stream(3, 0);
        for seed in 0..200 {
            let inst = generate_tsp(30, seed).unwrap();
            let graph = sparsify(&inst, 2).unwrap();
            for heatmap in [
                random_heatmap(&graph, &mut r),
                Heatmap::tsp(graph.directed_edges(), vec![0.0; graph.directed_edges().len()]).unwrap(),
                Heatmap::tsp(graph.directed_edges(), vec![1.0; graph.directed_edges().len()]).unwrap(),
            ] {
                let tour = tsp_greedy_decode(&heatmap, &inst, &graph);
                tour.validate(inst.coords()).unwrap();
            }
        }
    }

    #[test]
    fn coincident_points_rank_first() {
        let inst = TspInstance::new(0, vec![[0.2, 0.2], [0.2, 0.2], [0.9, 0.9], [0.1, 0.8]]).unwrap();
        let graph = dense(&inst);
        let heatmap = Heatmap::tsp(graph.directed_edges(), vec![0.0; 12]).unwrap();
        let ranked = ranked_edges(&heatmap, &inst, &graph);
        assert_eq!((ranked[0].0, ranked[0].1), (0, 1));
        tsp_greedy_decode(&heatmap, &inst, &graph).validate(inst.coords()).unwrap();
    }

    fn mis(n: usize, edges: &[(usize, usize)]) -> MisInstance {
        MisInstance::new(0, n, edges).unwrap()
    }

    #[test]
    fn mis_small_cases() {
        let tri = mis(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(mis_greedy_decode(&Heatmap::mis(vec![0.2, 0.9, 0.4]).unwrap(), &tri).size(), 1);

        let p3 = mis(3, &[(0, 1), (1, 2)]);
        let set = mis_greedy_decode(&Heatmap::mis(vec![0.9, 0.1, 0.8]).unwrap(), &p3);
        assert_eq!(set.nodes(), &[0, 2]);

        let star = mis(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(mis_greedy_decode(&Heatmap::mis(vec![1.0, 0.5, 0.5, 0.5, 0.5]).unwrap(), &star).size(), 1);
        assert_eq!(mis_greedy_decode(&Heatmap::mis(vec![0.0, 0.5, 0.6, 0.7, 0.8]).unwrap(), &star).size(), 4);
    }

    #[test]
    fn mis_ties_prefer_lower_index() {
        let p2 = mis(2, &[(0, 1)]);
        assert_eq!(mis_greedy_decode(&Heatmap::mis(vec![0.5, 0.5]).unwrap(), &p2).nodes(), &[0]);
    }

    #[test]
    fn mis_output_is_maximal() {
        let mut r = rng::stream(4, 0);
        for seed in 0..200 {
            let g = generate_er(10, 30, 0.2, seed).unwrap();
            let scores = (0..g.n()).map(|_| r.random::<f64>()).collect();
            let set = mis_greedy_decode(&Heatmap::mis(scores).unwrap(), &g);
            set.validate(&g).unwrap();
            assert!(set.is_maximal(&g));
        }
    }
}
