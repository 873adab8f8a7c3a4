use ndarray::Array2;

use super::embed::position_features;
use crate::instances::{Instance, MisInstance, SparseGraph, Task, TspInstance};

/// Static structure of one graph as seen by the network: directed edges
/// sorted by source, plus node input features for TSP.
///
/// Messages flow from `dst` to `src`: node `i` aggregates over the edges
/// whose source is `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub task: Task,
    pub n: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// `n × hidden` sinusoidal coordinates (TSP only).
    pub positions: Option<Array2<f64>>,
}

impl GraphInput {
    /// Variables are the directed sparse edges in `(source, target)` order.
    pub fn tsp(instance: &TspInstance, graph: &SparseGraph, hidden: usize) -> Self {
        let (src, dst) = graph.directed_edges().into_iter().unzip();
        let mut positions = Array2::zeros((instance.n(), hidden));
        for (i, mut row) in positions.rows_mut().into_iter().enumerate() {
            position_features(instance.coords()[i], hidden, row.as_slice_mut().expect("standard layout"));
        }
        GraphInput { task: Task::Tsp, n: instance.n(), src, dst, positions: Some(positions) }
    }

    /// Variables are the nodes.
    pub fn mis(instance: &MisInstance) -> Self {
        let mut src = Vec::with_capacity(2 * instance.edges().len());
        let mut dst = Vec::with_capacity(2 * instance.edges().len());
        for i in 0..instance.n() {
            for &j in instance.neighbors(i) {
                src.push(i);
                dst.push(j);
            }
        }
        GraphInput { task: Task::Mis, n: instance.n(), src, dst, positions: None }
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    /// Number of diffusion variables.
    pub fn num_variables(&self) -> usize {
        match self.task {
            Task::Tsp => self.num_edges(),
            Task::Mis => self.n,
        }
    }

    /// Ground-truth bits for this graph's variables from the instance label:
    /// a directed edge is 1 when its undirected edge is on the tour, a node
    /// is 1 when it is in the set. `None` for unlabeled instances.
    pub fn targets(&self, instance: &Instance) -> Option<Vec<u8>> {
        match instance {
            Instance::Tsp(t) => {
                let tour = t.label()?;
                let mut on_tour = std::collections::HashSet::new();
                for (u, v) in tour.edges() {
                    on_tour.insert((u, v));
                }
                Some(
                    self.src
                        .iter()
                        .zip(&self.dst)
                        .map(|(&a, &b)| u8::from(on_tour.contains(&(a.min(b), a.max(b)))))
                        .collect(),
                )
            }
            Instance::Mis(g) => {
                let set = g.label()?;
                Some((0..self.n).map(|v| u8::from(set.contains(v))).collect())
            }
        }
    }
}
