use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gdco::decoding::{graph_input, DecodeConfig};
use gdco::denoiser::{forward, DenoiserParams, ModelConfig, Sample};
use gdco::diffusion::Branch;
use gdco::harness::{evaluate, ModelSolver};
use gdco::instances::{generate_tsp_set, Instance, Task};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("1-thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("default", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn bench_forward(c: &mut Criterion) {
    let config = ModelConfig::new(Task::Tsp, Branch::Discrete).with_size(6, 64);
    let params = DenoiserParams::init(config, 0).unwrap();
    let instances: Vec<Instance> = generate_tsp_set(32, 20, 1).unwrap().into_iter().map(Instance::Tsp).collect();
    let graphs: Vec<_> = instances.iter().map(|i| graph_input(i, 64, Some(8)).unwrap().0).collect();
    let xs: Vec<Vec<f64>> = graphs.iter().map(|g| vec![0.0; g.num_variables()]).collect();
    let samples: Vec<Sample> = graphs.iter().zip(&xs).map(|(g, x)| Sample { graph: g, x, t: 500 }).collect();

    let mut group = c.benchmark_group("forward_tsp20_batch32");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| forward(&params, &samples, true).unwrap()))
        });
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let config = ModelConfig::new(Task::Tsp, Branch::Discrete).with_size(4, 32);
    let params = DenoiserParams::init(config, 0).unwrap();
    let instances: Vec<Instance> = generate_tsp_set(16, 12, 2).unwrap().into_iter().map(Instance::Tsp).collect();
    let solver =
        ModelSolver::new(&params, DecodeConfig { steps: 5, samples: 4, two_opt: true, ..DecodeConfig::default() })
            .unwrap();

    let mut group = c.benchmark_group("evaluate_tsp12");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| evaluate(&solver, &instances, &[0]).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_forward, bench_evaluate);
criterion_main!(benches);
