use super::{InstanceError, TspInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub weight: f64,
}

/// k-nearest-neighbor candidate graph, symmetrized by union.
///
/// `neighbors[i]` is sorted by node index; `(i, j)` is present exactly when
/// `(j, i)` is.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    pub n: usize,
    pub k: usize,
    neighbors: Vec<Vec<Neighbor>>,
}

impl SparseGraph {
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search_by_key(&j, |nb| nb.node).is_ok()
    }

    /// Every retained edge in both orientations, ordered by `(source, target)`.
    /// This is the variable order for TSP edge heatmaps and labels.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.neighbors.iter().enumerate().flat_map(|(i, list)| list.iter().map(move |nb| (i, nb.node))).collect()
    }

    /// Undirected edges `(u, v)` with `u < v`, ordered lexicographically.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.directed_edges().into_iter().filter(|&(u, v)| u < v).collect()
    }

    pub fn undirected_edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Keep each node's `k` nearest neighbors (ties to the lower index), then
/// take the union of both directions.
pub fn sparsify(instance: &TspInstance, k: usize) -> Result<SparseGraph, InstanceError> {
    let n = instance.n();
    if k == 0 || k >= n {
        return Err(InstanceError::InvalidArgument(format!("sparsification k = {k} must lie in [1, {}]", n - 1)));
    }
    let mut keep = vec![vec![false; n]; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| instance.dist(i, a).total_cmp(&instance.dist(i, b)).then(a.cmp(&b)));
        for &j in &order[..k] {
            keep[i][j] = true;
            keep[j][i] = true;
        }
    }
    let neighbors = (0..n)
        .map(|i| (0..n).filter(|&j| keep[i][j]).map(|j| Neighbor { node: j, weight: instance.dist(i, j) }).collect())
        .collect();
    Ok(SparseGraph { n, k, neighbors })
}

/// Dense candidate graph (every pair), equivalent to `sparsify(instance, n - 1)`.
pub fn dense(instance: &TspInstance) -> SparseGraph {
    let n = instance.n();
    let neighbors = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| Neighbor { node: j, weight: instance.dist(i, j) }).collect())
        .collect();
    SparseGraph { n, k: n - 1, neighbors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::generate_tsp;

    #[test]
    fn full_k_is_dense() {
        let inst = generate_tsp(12, 4).unwrap();
        let g = sparsify(&inst, 11).unwrap();
        assert_eq!(g, dense(&inst));
        assert_eq!(g.undirected_edge_count(), 66);
    }

    #[test]
    fn square_corners_keep_sides_only() {
        let inst = TspInstance::new(0, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let g = sparsify(&inst, 1).unwrap();
        for (u, v) in g.undirected_edges() {
            assert!((inst.dist(u, v) - 1.0).abs() < 1e-12, "diagonal ({u},{v}) kept");
        }
        // corner 0 ties between 1 and 3, picks 1; corner 1 ties 0/2, picks 0;
        // corner 2 ties 1/3, picks 1; corner 3 ties 0/2, picks 0.
        assert_eq!(g.undirected_edges(), vec![(0, 1), (0, 3), (1, 2)]);
    }

    #[test]
    fn symmetrized_edge_count_bounds() {
        let inst = generate_tsp(100, 5).unwrap();
        let g = sparsify(&inst, 10).unwrap();
        let m = g.undirected_edge_count();
        assert!((500..=1000).contains(&m), "edge count {m}");
    }

    #[test]
    fn rejects_out_of_range_k() {
        let inst = generate_tsp(5, 1).unwrap();
        assert!(sparsify(&inst, 0).is_err());
        assert!(sparsify(&inst, 5).is_err());
    }

    #[test]
    fn every_edge_is_a_knn_of_some_endpoint() {
        for seed in 0..20u64 {
            let n = 20 + (seed as usize * 9) % 180;
            let inst = generate_tsp(n, seed).unwrap();
            let k = 1 + (seed as usize) % 8;
            let g = sparsify(&inst, k).unwrap();
            // brute force: rank of j among i's neighbors by (distance, index)
            let rank = |i: usize, j: usize| {
                (0..n)
                    .filter(|&o| o != i && o != j)
                    .filter(|&o| {
                        let (a, b) = (inst.dist(i, o), inst.dist(i, j));
                        a < b || (a == b && o < j)
                    })
                    .count()
            };
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let expect = rank(i, j) < k || rank(j, i) < k;
                    assert_eq!(g.contains(i, j), expect, "n={n} k={k} ({i},{j})");
                    assert_eq!(g.contains(i, j), g.contains(j, i));
                }
            }
        }
    }
}
