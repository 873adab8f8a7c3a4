//! Problem instances: Euclidean TSP point sets and MIS graphs, their
//! solutions, generators, k-nearest-neighbor sparsification, and the
//! plain-text instance file format.

mod io;
mod sparse;

pub use io::{format_instance, load_instances, parse_instance, save_instances};
pub use sparse::{dense, sparsify, Neighbor, SparseGraph};

use rand::Rng as _;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("infeasible solution: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Undirected weighted edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// A closed tour, stored as a node permutation plus its total length
/// (return edge included).
#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    order: Vec<usize>,
    length: f64,
}

impl Tour {
    /// Build a tour over `coords`, checking that `order` is a permutation.
    pub fn new(order: Vec<usize>, coords: &[Point]) -> Result<Self, InstanceError> {
        check_permutation(&order, coords.len())?;
        let length = tour_length(&order, coords);
        Ok(Tour { order, length })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    /// Rotation/reflection-normalized node order: starts at node 0 and walks
    /// toward the smaller of its two tour neighbors.
    pub fn canonical(&self) -> Vec<usize> {
        canonical_order(&self.order)
    }

    /// Same cycle up to rotation and direction.
    pub fn same_cycle(&self, other: &Tour) -> bool {
        self.canonical() == other.canonical()
    }

    /// Re-check the permutation and the stored length against `coords`.
    pub fn validate(&self, coords: &[Point]) -> Result<(), InstanceError> {
        check_permutation(&self.order, coords.len())?;
        let recomputed = tour_length(&self.order, coords);
        if (recomputed - self.length).abs() > 1e-9 {
            return Err(InstanceError::Infeasible(format!(
                "stored tour length {} differs from recomputed {}",
                self.length, recomputed
            )));
        }
        Ok(())
    }

    /// Undirected edges `(min, max)` used by the tour.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.order.len();
        (0..n)
            .map(|i| {
                let a = self.order[i];
                let b = self.order[(i + 1) % n];
                (a.min(b), a.max(b))
            })
            .collect()
    }
}

pub fn tour_length(order: &[usize], coords: &[Point]) -> f64 {
    let n = order.len();
    (0..n).map(|i| distance(coords[order[i]], coords[order[(i + 1) % n]])).sum()
}

pub(crate) fn canonical_order(order: &[usize]) -> Vec<usize> {
    let n = order.len();
    if n == 0 {
        return Vec::new();
    }
    let start = order.iter().position(|&v| v == 0).unwrap_or(0);
    let fwd = order[(start + 1) % n];
    let back = order[(start + n - 1) % n];
    if fwd <= back {
        (0..n).map(|i| order[(start + i) % n]).collect()
    } else {
        (0..n).map(|i| order[(start + n - i) % n]).collect()
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<(), InstanceError> {
    if order.len() != n {
        return Err(InstanceError::Infeasible(format!("tour visits {} nodes, instance has {}", order.len(), n)));
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n {
            return Err(InstanceError::Infeasible(format!("node {v} out of range")));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(InstanceError::Infeasible(format!("node {v} visited twice")));
        }
    }
    Ok(())
}

/// A node subset with no two members adjacent. Nodes are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependentSet {
    nodes: Vec<usize>,
}

impl IndependentSet {
    pub fn new(mut nodes: Vec<usize>, graph: &MisInstance) -> Result<Self, InstanceError> {
        nodes.sort_unstable();
        nodes.dedup();
        let set = IndependentSet { nodes };
        set.validate(graph)?;
        Ok(set)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    pub fn validate(&self, graph: &MisInstance) -> Result<(), InstanceError> {
        let mut member = vec![false; graph.n];
        for &v in &self.nodes {
            if v >= graph.n {
                return Err(InstanceError::Infeasible(format!("node {v} out of range")));
            }
            member[v] = true;
        }
        for &(u, v) in &graph.edges {
            if member[u] && member[v] {
                return Err(InstanceError::Infeasible(format!("adjacent nodes {u} and {v} both selected")));
            }
        }
        Ok(())
    }

    /// True when no outside node can be added without a conflict.
    pub fn is_maximal(&self, graph: &MisInstance) -> bool {
        let mut blocked = vec![false; graph.n];
        for &v in &self.nodes {
            blocked[v] = true;
            for &w in graph.neighbors(v) {
                blocked[w] = true;
            }
        }
        blocked.into_iter().all(|b| b)
    }
}

/// Euclidean TSP instance on the unit square with a dense edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    pub id: usize,
    coords: Vec<Point>,
    edges: Vec<Edge>,
    label: Option<Tour>,
}

impl TspInstance {
    pub fn new(id: usize, coords: Vec<Point>) -> Result<Self, InstanceError> {
        if coords.len() < 2 {
            return Err(InstanceError::InvalidArgument(format!("TSP needs at least 2 nodes, got {}", coords.len())));
        }
        for (i, c) in coords.iter().enumerate() {
            if !c.iter().all(|x| (0.0..=1.0).contains(x)) {
                return Err(InstanceError::InvalidArgument(format!(
                    "node {i} at ({}, {}) lies outside the unit square",
                    c[0], c[1]
                )));
            }
        }
        let n = coords.len();
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for u in 0..n {
            for v in u + 1..n {
                edges.push(Edge { u, v, weight: distance(coords[u], coords[v]) });
            }
        }
        Ok(TspInstance { id, coords, edges, label: None })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn dist(&self, u: usize, v: usize) -> f64 {
        distance(self.coords[u], self.coords[v])
    }

    pub fn label(&self) -> Option<&Tour> {
        self.label.as_ref()
    }

    pub fn set_label(&mut self, tour: Tour) -> Result<(), InstanceError> {
        tour.validate(&self.coords)?;
        self.label = Some(tour);
        Ok(())
    }

    pub fn clear_label(&mut self) {
        self.label = None;
    }
}

/// Undirected simple graph for the independent set problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MisInstance {
    pub id: usize,
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    label: Option<IndependentSet>,
}

impl MisInstance {
    /// Build from an edge list. Edges are normalized to `(min, max)`,
    /// deduplicated and sorted; self-loops are rejected.
    pub fn new(id: usize, n: usize, edges: &[(usize, usize)]) -> Result<Self, InstanceError> {
        let mut norm = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(InstanceError::InvalidArgument(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(InstanceError::InvalidArgument(format!("self-loop at node {u}")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        norm.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &norm {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(MisInstance { id, n, edges: norm, adjacency, label: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn label(&self) -> Option<&IndependentSet> {
        self.label.as_ref()
    }

    pub fn set_label(&mut self, set: IndependentSet) -> Result<(), InstanceError> {
        set.validate(self)?;
        self.label = Some(set);
        Ok(())
    }

    pub fn clear_label(&mut self) {
        self.label = None;
    }
}

/// Either kind of instance, as stored in an instance file.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Tsp(TspInstance),
    Mis(MisInstance),
}

impl Instance {
    pub fn id(&self) -> usize {
        match self {
            Instance::Tsp(t) => t.id,
            Instance::Mis(m) => m.id,
        }
    }

    pub fn set_id(&mut self, id: usize) {
        match self {
            Instance::Tsp(t) => t.id = id,
            Instance::Mis(m) => m.id = id,
        }
    }

    pub fn task(&self) -> Task {
        match self {
            Instance::Tsp(_) => Task::Tsp,
            Instance::Mis(_) => Task::Mis,
        }
    }

    pub fn is_labeled(&self) -> bool {
        match self {
            Instance::Tsp(t) => t.label.is_some(),
            Instance::Mis(m) => m.label.is_some(),
        }
    }
}

/// Problem family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Tsp,
    Mis,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Tsp => "tsp",
            Task::Mis => "mis",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsp" => Ok(Task::Tsp),
            "mis" => Ok(Task::Mis),
            other => Err(format!("unknown task `{other}` (expected tsp or mis)")),
        }
    }
}

/// `n` points i.i.d. uniform on the unit square.
pub fn generate_tsp(n: usize, seed: u64) -> Result<TspInstance, InstanceError> {
    if n < 2 {
        return Err(InstanceError::InvalidArgument(format!("TSP needs n >= 2, got {n}")));
    }
    let mut rng = rng::stream(seed, 0);
    let coords = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    TspInstance::new(0, coords)
}

/// Erdős–Rényi graph with node count uniform in `[n_min, n_max]` and edge
/// probability `p`.
pub fn generate_er(n_min: usize, n_max: usize, p: f64, seed: u64) -> Result<MisInstance, InstanceError> {
    if n_min < 2 || n_min > n_max {
        return Err(InstanceError::InvalidArgument(format!(
            "node range [{n_min}, {n_max}] must satisfy 2 <= min <= max"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(InstanceError::InvalidArgument(format!("edge probability {p} not in [0, 1]")));
    }
    let mut rng = rng::stream(seed, 0);
    let n = rng.random_range(n_min..=n_max);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    MisInstance::new(0, n, &edges)
}

/// `count` TSP instances with ids `0..count`, each on its own seed stream.
pub fn generate_tsp_set(count: usize, n: usize, seed: u64) -> Result<Vec<TspInstance>, InstanceError> {
    (0..count)
        .map(|i| {
            let mut inst = generate_tsp(n, rng::derive(seed, i as u64))?;
            inst.id = i;
            Ok(inst)
        })
        .collect()
}

/// `count` ER graphs with ids `0..count`.
pub fn generate_er_set(
    count: usize,
    n_min: usize,
    n_max: usize,
    p: f64,
    seed: u64,
) -> Result<Vec<MisInstance>, InstanceError> {
    (0..count)
        .map(|i| {
            let mut inst = generate_er(n_min, n_max, p, rng::derive(seed, i as u64))?;
            inst.id = i;
            Ok(inst)
        })
        .collect()
}
