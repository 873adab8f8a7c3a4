use ndarray::{s, Array1, Array2, ArrayView2};

use super::embed::sinusoidal_embedding;
use super::graph::GraphInput;
use super::linalg::{
    add_tn, affine, affine_backward, gather_add, matmul, norm_backward, norm_forward, relu, relu_backward, scatter_add,
    sigmoid, BatchStats, NormCache,
};
use super::params::{DenoiserParams, ModelConfig};
use super::DenoiserError;
use crate::instances::Task;

/// One graph, its noisy variables, and the timestep.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub graph: &'a GraphInput,
    pub x: &'a [f64],
    pub t: usize,
}

/// Batch statistics produced by one layer in training mode. `None` when the
/// path had no rows (an edgeless batch).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    pub node: Option<BatchStats>,
    pub edge: Option<BatchStats>,
}

/// Disjoint union of the samples in a batch.
#[derive(Debug, Clone)]
struct Batch {
    src: Vec<usize>,
    dst: Vec<usize>,
    /// CSR offsets into the edge list by source node.
    edge_start: Vec<usize>,
    edge_graph: Vec<usize>,
    node_input: Array2<f64>,
    edge_input: Option<Array2<f64>>,
    time: Array2<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    h: Array2<f64>,
    e: Array2<f64>,
    edge_norm: NormCache,
    z: Array2<f64>,
    m1: Array2<f64>,
    t1: Array2<f64>,
    gate: Array2<f64>,
    vh: Array2<f64>,
    node_norm: NormCache,
    y: Array2<f64>,
}

#[derive(Debug, Clone)]
struct Cache {
    config: ModelConfig,
    batch: Batch,
    layers: Vec<LayerCache>,
    head_input: Array2<f64>,
}

/// Result of a forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `variables × output_dim`, samples stacked in batch order.
    pub outputs: Array2<f64>,
    /// Row offsets of each sample in `outputs`; `offsets[i]..offsets[i+1]`.
    pub offsets: Vec<usize>,
    pub final_nodes: Array2<f64>,
    pub final_edges: Array2<f64>,
    /// Per-layer batch statistics (training mode only).
    pub stats: Vec<LayerStats>,
    cache: Option<Cache>,
}

impl ForwardPass {
    pub fn sample_outputs(&self, i: usize) -> ArrayView2<'_, f64> {
        self.outputs.slice(s![self.offsets[i]..self.offsets[i + 1], ..])
    }

    pub fn num_samples(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    /// Signs of every ReLU pre-activation in the cached pass. Two passes
    /// with equal patterns lie on the same smooth piece of the network.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let Some(cache) = &self.cache else { return Vec::new() };
        cache.layers.iter().flat_map(|l| l.m1.iter().chain(l.t1.iter()).chain(l.y.iter())).map(|&v| v > 0.0).collect()
    }
}

fn assemble(config: &ModelConfig, samples: &[Sample]) -> Result<(Batch, Vec<usize>), DenoiserError> {
    let mut n_total = 0;
    let mut m_total = 0;
    for (g, sample) in samples.iter().enumerate() {
        let graph = sample.graph;
        if graph.task != config.task {
            return Err(DenoiserError::TaskMismatch { expected: config.task, got: graph.task });
        }
        if graph.dst.len() != graph.src.len() {
            return Err(DenoiserError::InvalidGraph(format!("graph {g}: src/dst lengths differ")));
        }
        if graph.src.windows(2).any(|w| w[0] > w[1]) {
            return Err(DenoiserError::InvalidGraph(format!("graph {g}: edges not sorted by source")));
        }
        if graph.src.iter().chain(&graph.dst).any(|&v| v >= graph.n) {
            return Err(DenoiserError::InvalidGraph(format!("graph {g}: edge endpoint out of range")));
        }
        if sample.x.len() != graph.num_variables() {
            return Err(DenoiserError::ShapeMismatch {
                what: "noisy variables",
                expected: graph.num_variables(),
                got: sample.x.len(),
            });
        }
        if config.task == Task::Tsp {
            let ok = graph.positions.as_ref().is_some_and(|p| p.dim() == (graph.n, config.hidden));
            if !ok {
                return Err(DenoiserError::InvalidGraph(format!(
                    "graph {g}: position features must be {} × {}",
                    graph.n, config.hidden
                )));
            }
        }
        if sample.t > config.steps {
            return Err(DenoiserError::ShapeMismatch { what: "timestep", expected: config.steps, got: sample.t });
        }
        n_total += graph.n;
        m_total += graph.num_edges();
    }

    let mut src = Vec::with_capacity(m_total);
    let mut dst = Vec::with_capacity(m_total);
    let mut edge_graph = Vec::with_capacity(m_total);
    let mut node_input = Array2::zeros((n_total, config.node_input_dim()));
    let mut edge_input = (config.task == Task::Tsp).then(|| Array2::zeros((m_total, 1)));
    let mut time = Array2::zeros((samples.len(), config.time_dim));
    let mut offsets = vec![0];
    let (mut node_off, mut edge_off) = (0, 0);
    for (g, sample) in samples.iter().enumerate() {
        let graph = sample.graph;
        src.extend(graph.src.iter().map(|&v| v + node_off));
        dst.extend(graph.dst.iter().map(|&v| v + node_off));
        edge_graph.extend(std::iter::repeat_n(g, graph.num_edges()));
        let rows = s![node_off..node_off + graph.n, ..];
        match config.task {
            Task::Tsp => {
                node_input.slice_mut(rows).assign(graph.positions.as_ref().expect("checked above"));
                let col = edge_input.as_mut().expect("tsp");
                for (k, &x) in sample.x.iter().enumerate() {
                    col[[edge_off + k, 0]] = x;
                }
            }
            Task::Mis => {
                for (i, &x) in sample.x.iter().enumerate() {
                    node_input[[node_off + i, 0]] = x;
                }
            }
        }
        let emb = sinusoidal_embedding(sample.t, config.time_dim)?;
        time.row_mut(g).assign(&Array1::from(emb));
        node_off += graph.n;
        edge_off += graph.num_edges();
        offsets.push(offsets[g] + graph.num_variables());
    }
    let mut edge_start = vec![0; n_total + 1];
    for &v in &src {
        edge_start[v + 1] += 1;
    }
    for i in 0..n_total {
        edge_start[i + 1] += edge_start[i];
    }
    Ok((Batch { src, dst, edge_start, edge_graph, node_input, edge_input, time }, offsets))
}

/// `s[i] += Σ_{k: src_k = i} gate[k] ⊙ vh[dst_k]`.
fn aggregate(s: &mut Array2<f64>, gate: &Array2<f64>, vh: &Array2<f64>, batch: &Batch) {
    let d = s.ncols();
    crate::par::for_each_row_chunk(s.as_slice_mut().expect("standard layout"), d, 128, |chunk, row0| {
        for (r, row) in chunk.chunks_mut(d).enumerate() {
            let i = row0 + r;
            for k in batch.edge_start[i]..batch.edge_start[i + 1] {
                let g = gate.row(k);
                let v = vh.row(batch.dst[k]);
                for ((o, &a), &b) in row.iter_mut().zip(g).zip(v) {
                    *o += a * b;
                }
            }
        }
    });
}

/// Run the network on a batch of graphs. Training mode normalizes with
/// batch statistics and keeps the activations needed by [`backward`].
pub fn forward(params: &DenoiserParams, samples: &[Sample], train: bool) -> Result<ForwardPass, DenoiserError> {
    let config = params.config;
    let (batch, offsets) = assemble(&config, samples)?;
    let d = config.hidden;
    let m = batch.src.len();

    let mut h = affine(batch.node_input.view(), &params.node_in);
    let mut e = match (&batch.edge_input, &params.edge_in) {
        (Some(x), Some(lin)) => affine(x.view(), lin),
        _ => Array2::zeros((m, d)),
    };

    let mut caches = Vec::with_capacity(if train { config.layers } else { 0 });
    let mut stats = Vec::new();
    for layer in &params.layers {
        let mut e_hat = matmul(e.view(), layer.p.view());
        gather_add(&mut e_hat, &matmul(h.view(), layer.q.view()), &batch.src);
        gather_add(&mut e_hat, &matmul(h.view(), layer.r.view()), &batch.dst);

        let (z, edge_cache, edge_stats) = norm_forward(&e_hat, &layer.edge_norm, &layer.edge_stats, train);
        let m1 = affine(z.view(), &layer.edge_mlp.first);
        let m2 = affine(relu(&m1).view(), &layer.edge_mlp.second);
        let t1 = affine(batch.time.view(), &layer.time_mlp.first);
        let t2 = affine(relu(&t1).view(), &layer.time_mlp.second);
        let mut e_next = &e + &m2;
        gather_add(&mut e_next, &t2, &batch.edge_graph);

        let gate = e_hat.mapv(sigmoid);
        let vh = matmul(h.view(), layer.v.view());
        let mut agg = matmul(h.view(), layer.u.view());
        aggregate(&mut agg, &gate, &vh, &batch);
        let (y, node_cache, node_stats) = norm_forward(&agg, &layer.node_norm, &layer.node_stats, train);
        let h_next = &h + &relu(&y);

        if train {
            stats.push(LayerStats { node: node_stats, edge: edge_stats });
            caches.push(LayerCache {
                h,
                e,
                edge_norm: edge_cache.expect("train mode"),
                z,
                m1,
                t1,
                gate,
                vh,
                node_norm: node_cache.expect("train mode"),
                y,
            });
        }
        h = h_next;
        e = e_next;
    }

    let head_input = match config.task {
        Task::Tsp => e.clone(),
        Task::Mis => h.clone(),
    };
    let outputs = affine(head_input.view(), &params.head);
    let cache = train.then(|| Cache { config, batch, layers: caches, head_input });
    Ok(ForwardPass { outputs, offsets, final_nodes: h, final_edges: e, stats, cache })
}

/// Gradients of `Σ outputs ⊙ grad_out` with respect to every learnable
/// tensor, returned in a parameter-shaped container.
pub fn backward(
    params: &DenoiserParams,
    pass: &ForwardPass,
    grad_out: &Array2<f64>,
) -> Result<DenoiserParams, DenoiserError> {
    let cache = pass
        .cache
        .as_ref()
        .ok_or_else(|| DenoiserError::StaleCache("forward pass was not run in training mode".into()))?;
    if cache.config != params.config || cache.layers.len() != params.layers.len() {
        return Err(DenoiserError::StaleCache("cache was produced by a different architecture".into()));
    }
    if grad_out.dim() != pass.outputs.dim() {
        return Err(DenoiserError::ShapeMismatch {
            what: "output gradient rows",
            expected: pass.outputs.nrows(),
            got: grad_out.nrows(),
        });
    }
    let batch = &cache.batch;
    let mut grads = DenoiserParams::zeros(params.config)?;

    let d_head = affine_backward(cache.head_input.view(), &params.head, &mut grads.head, grad_out.view(), true)
        .expect("requested");
    let (mut dh, mut de) = match params.config.task {
        Task::Tsp => (Array2::zeros(pass.final_nodes.dim()), d_head),
        Task::Mis => (d_head, Array2::zeros(pass.final_edges.dim())),
    };

    for (li, (layer, lc)) in params.layers.iter().zip(&cache.layers).enumerate().rev() {
        let lg = &mut grads.layers[li];

        // edge residual branch: e' = e + MLP_e(BN(ê)) + MLP_t(t)[graph]
        let mut dt2 = Array2::zeros((batch.time.nrows(), de.ncols()));
        scatter_add(&mut dt2, &de, &batch.edge_graph);
        let dtr =
            affine_backward(relu(&lc.t1).view(), &layer.time_mlp.second, &mut lg.time_mlp.second, dt2.view(), true)
                .expect("requested");
        let dt1 = relu_backward(&lc.t1, &dtr);
        affine_backward(batch.time.view(), &layer.time_mlp.first, &mut lg.time_mlp.first, dt1.view(), false);

        let dr1 =
            affine_backward(relu(&lc.m1).view(), &layer.edge_mlp.second, &mut lg.edge_mlp.second, de.view(), true)
                .expect("requested");
        let dm1 = relu_backward(&lc.m1, &dr1);
        let dz = affine_backward(lc.z.view(), &layer.edge_mlp.first, &mut lg.edge_mlp.first, dm1.view(), true)
            .expect("requested");
        let mut de_hat = norm_backward(&dz, &lc.edge_norm, &layer.edge_norm, &mut lg.edge_norm);
        let mut de_prev = de;

        // node residual branch: h' = h + ReLU(BN(U h + Σ σ(ê) ⊙ V h_j))
        let dy = relu_backward(&lc.y, &dh);
        let dagg = norm_backward(&dy, &lc.node_norm, &layer.node_norm, &mut lg.node_norm);
        let mut dh_prev = dh;
        add_tn(&mut lg.u, lc.h.view(), dagg.view());
        dh_prev += &matmul(dagg.view(), layer.u.t());

        let mut dvh = Array2::zeros(lc.vh.dim());
        for k in 0..batch.src.len() {
            let ds = dagg.row(batch.src[k]);
            let g = lc.gate.row(k);
            let v = lc.vh.row(batch.dst[k]);
            let mut dg = de_hat.row_mut(k);
            for c in 0..ds.len() {
                dg[c] += ds[c] * v[c] * g[c] * (1.0 - g[c]);
            }
            let mut dv = dvh.row_mut(batch.dst[k]);
            for c in 0..ds.len() {
                dv[c] += ds[c] * g[c];
            }
        }
        add_tn(&mut lg.v, lc.h.view(), dvh.view());
        dh_prev += &matmul(dvh.view(), layer.v.t());

        // ê = P e + Q h_src + R h_dst
        add_tn(&mut lg.p, lc.e.view(), de_hat.view());
        de_prev += &matmul(de_hat.view(), layer.p.t());
        let mut da = Array2::zeros(lc.h.dim());
        scatter_add(&mut da, &de_hat, &batch.src);
        let mut db = Array2::zeros(lc.h.dim());
        scatter_add(&mut db, &de_hat, &batch.dst);
        add_tn(&mut lg.q, lc.h.view(), da.view());
        add_tn(&mut lg.r, lc.h.view(), db.view());
        dh_prev += &matmul(da.view(), layer.q.t());
        dh_prev += &matmul(db.view(), layer.r.t());

        dh = dh_prev;
        de = de_prev;
    }

    affine_backward(batch.node_input.view(), &params.node_in, &mut grads.node_in, dh.view(), false);
    if let (Some(x), Some(lin), Some(g)) = (&batch.edge_input, &params.edge_in, grads.edge_in.as_mut()) {
        affine_backward(x.view(), lin, g, de.view(), false);
    }
    Ok(grads)
}

/// Fold training-mode batch statistics into the running statistics:
/// `running ← momentum·running + (1 − momentum)·batch`.
pub fn update_running_stats(params: &mut DenoiserParams, stats: &[LayerStats], momentum: f64) {
    for (layer, s) in params.layers.iter_mut().zip(stats) {
        for (running, batch) in [(&mut layer.node_stats, &s.node), (&mut layer.edge_stats, &s.edge)] {
            if let Some(b) = batch {
                running.mean.zip_mut_with(&b.mean, |r, &v| *r = momentum * *r + (1.0 - momentum) * v);
                running.var.zip_mut_with(&b.var, |r, &v| *r = momentum * *r + (1.0 - momentum) * v);
            }
        }
    }
}
