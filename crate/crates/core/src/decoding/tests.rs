use super::*;
use crate::denoiser::{DenoiserParams, ModelConfig, Prediction, Sample};
use crate::diffusion::{discrete, Branch};
use crate::instances::{generate_er, generate_tsp};
use crate::oracle::{solve_mis_exact, solve_tsp_exact};
use rand::Rng;

/// Predicts the stored answer no matter the input.
struct Rigged {
    config: ModelConfig,
    target: Vec<u8>,
    sched: NoiseSchedule,
}

impl Denoise for Rigged {
    fn config(&self) -> ModelConfig {
        self.config
    }

    fn predict(&self, samples: &[Sample]) -> Result<Vec<Prediction>, DenoiserError> {
        Ok(samples
            .iter()
            .map(|s| match self.config.branch {
                Branch::Discrete => Prediction::X0Probs(self.target.iter().map(|&b| discrete::one_hot(b)).collect()),
                Branch::Continuous => {
                    let ab = self.sched.alpha_bar(s.t);
                    Prediction::Eps(
                        s.x.iter()
                            .zip(&self.target)
                            .map(|(&x, &b)| (x - ab.sqrt() * if b == 1 { 1.0 } else { -1.0 }) / (1.0 - ab).sqrt())
                            .collect(),
                    )
                }
            })
            .collect())
    }
}

fn labeled_tsp(n: usize, seed: u64) -> Instance {
    let mut t = generate_tsp(n, seed).unwrap();
    let tour = solve_tsp_exact(&t).unwrap().solution;
    t.set_label(tour).unwrap();
    Instance::Tsp(t)
}

fn labeled_mis(n: usize, seed: u64) -> Instance {
    let mut g = generate_er(n, n, 0.3, seed).unwrap();
    let set = solve_mis_exact(&g).unwrap().solution;
    g.set_label(set).unwrap();
    Instance::Mis(g)
}

fn small_config(task: Task, branch: Branch) -> ModelConfig {
    ModelConfig::new(task, branch).with_size(1, 8)
}

#[test]
fn oracle_chain_returns_label() {
    let sched = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
    for (i, task) in [Task::Tsp, Task::Mis].into_iter().enumerate() {
        for branch in [Branch::Discrete, Branch::Continuous] {
            for steps in [1, 5, 50] {
                for kind in [ScheduleKind::Linear, ScheduleKind::Cosine] {
                    let seed = 10 * i as u64 + steps as u64;
                    let inst = match task {
                        Task::Tsp => labeled_tsp(8, seed),
                        Task::Mis => labeled_mis(12, seed),
                    };
                    let (graph, sparse) = graph_input(&inst, 8, None).unwrap();
                    let target = graph.targets(&inst).unwrap();
                    let rig =
                        Rigged { config: small_config(task, branch), target: target.clone(), sched: sched.clone() };
                    let inf = InferenceSchedule::new(steps, 1000, kind).unwrap();
                    let out =
                        run_reverse_chain(&rig, &sched, &inf, &graph, StepModes::default(), &mut rng::stream(seed, 0))
                            .unwrap();
                    assert_eq!(out.state, target);
                    for (s, &b) in out.heatmap.scores.iter().zip(&target) {
                        assert!((s - b as f64).abs() < 1e-9);
                    }
                    let sol = decode_heatmap(
                        &out.heatmap,
                        &inst,
                        sparse.as_ref(),
                        &DecodeConfig::default(),
                        &mut PhaseTimes::default(),
                    )
                    .unwrap();
                    match (&sol, &inst) {
                        (Solution::Tour(t), Instance::Tsp(i)) => assert!(t.same_cycle(i.label().unwrap())),
                        (Solution::Set(s), Instance::Mis(g)) => assert_eq!(s, g.label().unwrap()),
                        _ => unreachable!(),
                    }
                }
            }
        }
    }
}

#[test]
fn single_step_heatmap_is_one_network_call_on_noise() {
    let sched = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
    let mut cfg = small_config(Task::Mis, Branch::Discrete);
    cfg.steps = 1000;
    let model = DenoiserParams::init(cfg, 5).unwrap();
    let inst = labeled_mis(10, 3);
    let (graph, _) = graph_input(&inst, 8, None).unwrap();
    let inf = InferenceSchedule::new(1, 1000, ScheduleKind::Linear).unwrap();
    let out = run_reverse_chain(&model, &sched, &inf, &graph, StepModes::default(), &mut rng::stream(4, 0)).unwrap();

    let noise = discrete::sample_bits(&[[0.5, 0.5]; 10], &mut rng::stream(4, 0));
    let x: Vec<f64> = noise.iter().map(|&b| b as f64).collect();
    let Prediction::X0Probs(p) = model.predict(&[Sample { graph: &graph, x: &x, t: 1000 }]).unwrap().remove(0) else {
        panic!("discrete model")
    };
    let direct: Vec<f64> = p.iter().map(|q| q[1]).collect();
    assert_eq!(out.heatmap.scores, direct);
}

#[test]
fn heatmaps_stay_in_range_for_untrained_models() {
    for branch in [Branch::Discrete, Branch::Continuous] {
        for task in [Task::Tsp, Task::Mis] {
            let mut cfg = small_config(task, branch);
            cfg.steps = 100;
            let sched = NoiseSchedule::linear(100, 1e-4, 0.02).unwrap();
            let model = DenoiserParams::init(cfg, 1).unwrap();
            let inst = match task {
                Task::Tsp => labeled_tsp(7, 1),
                Task::Mis => labeled_mis(9, 1),
            };
            let (graph, _) = graph_input(&inst, 8, None).unwrap();
            let inf = InferenceSchedule::new(5, 100, ScheduleKind::Cosine).unwrap();
            for seed in 0..3 {
                for mode in [ContinuousMode::Ddim, ContinuousMode::Ddpm] {
                    let out = run_reverse_chain(
                        &model,
                        &sched,
                        &inf,
                        &graph,
                        StepModes { continuous: mode, ..StepModes::default() },
                        &mut rng::stream(seed, 0),
                    )
                    .unwrap();
                    assert_eq!(out.heatmap.len(), graph.num_variables());
                    assert!(out.heatmap.scores.iter().all(|s| (0.0..=1.0).contains(s)));
                }
            }
        }
    }
}

#[test]
fn schedule_mismatch_is_rejected() {
    let sched = NoiseSchedule::linear(100, 1e-4, 0.02).unwrap();
    let model = DenoiserParams::init(small_config(Task::Mis, Branch::Discrete), 1).unwrap();
    let inst = labeled_mis(6, 0);
    let (graph, _) = graph_input(&inst, 8, None).unwrap();
    let inf = InferenceSchedule::new(5, 100, ScheduleKind::Linear).unwrap();
    assert!(matches!(
        run_reverse_chain(&model, &sched, &inf, &graph, StepModes::default(), &mut rng::stream(0, 0)),
        Err(DecodeError::Mismatch(_))
    ));
}

#[test]
fn single_sample_equals_single_chain() {
    let sched = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
    let mut cfg = small_config(Task::Tsp, Branch::Discrete);
    cfg.steps = 1000;
    let model = DenoiserParams::init(cfg, 2).unwrap();
    let inst = labeled_tsp(9, 4);
    let config = DecodeConfig { steps: 10, two_opt: true, ..DecodeConfig::default() };
    let solved = multi_sample_solve(&model, &sched, &inst, &config, 77).unwrap();

    let (graph, sparse) = graph_input(&inst, 8, None).unwrap();
    let inf = InferenceSchedule::new(10, 1000, ScheduleKind::Linear).unwrap();
    let out = run_reverse_chain(&model, &sched, &inf, &graph, StepModes::default(), &mut rng::stream(77, 0)).unwrap();
    let single = decode_heatmap(&out.heatmap, &inst, sparse.as_ref(), &config, &mut PhaseTimes::default()).unwrap();
    assert_eq!(solved.best, single);
    assert_eq!(solved.candidates.len(), 1);
}

#[test]
fn best_of_k_is_monotone_in_nested_seed_sets() {
    let sched = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
    for (task, branch) in [(Task::Tsp, Branch::Continuous), (Task::Mis, Branch::Discrete)] {
        let mut cfg = small_config(task, branch);
        cfg.steps = 1000;
        let model = DenoiserParams::init(cfg, 3).unwrap();
        for seed in 0..5 {
            let inst = match task {
                Task::Tsp => labeled_tsp(10, seed),
                Task::Mis => labeled_mis(14, seed),
            };
            let mut prev: Option<SolveResult> = None;
            for k in [1, 2, 4, 8] {
                let config = DecodeConfig { steps: 5, samples: k, ..DecodeConfig::default() };
                let res = multi_sample_solve(&model, &sched, &inst, &config, seed).unwrap();
                if let Some(p) = &prev {
                    assert_eq!(&res.candidates[..p.candidates.len()], p.candidates.as_slice());
                    assert!(!p.best.improves_on(&res.best));
                }
                prev = Some(res);
            }
        }
    }
}

#[test]
fn decoders_stay_feasible_on_adversarial_heatmaps() {
    let mut r = rng::stream(99, 0);
    for trial in 0..500u64 {
        let inst = generate_tsp(r.random_range(2..15), trial).unwrap();
        let graph = candidate_graph(&inst, Some(3)).unwrap();
        let edges = graph.directed_edges();
        let m = edges.len();
        let ties: Vec<f64> = (0..m).map(|k| (k % 3) as f64 / 2.0).collect();
        for scores in [vec![0.0; m], vec![1.0; m], ties, (0..m).map(|_| r.random()).collect()] {
            let h = Heatmap::tsp(edges.clone(), scores).unwrap();
            let tour = tsp_greedy_decode(&h, &inst, &graph);
            tour.validate(inst.coords()).unwrap();
            let better = two_opt(&tour, &inst, DEFAULT_MAX_PASSES);
            assert!(better.length() <= tour.length() + 1e-12);
        }
        let g = generate_er(2, 25, 0.3, trial).unwrap();
        let n = g.n();
        for scores in [vec![0.0; n], vec![1.0; n], (0..n).map(|_| r.random()).collect()] {
            let set = mis_greedy_decode(&Heatmap::mis(scores).unwrap(), &g);
            set.validate(&g).unwrap();
        }
    }
}

#[test]
fn heatmap_rejects_bad_scores() {
    assert!(Heatmap::mis(vec![0.5, 1.5]).is_err());
    assert!(Heatmap::mis(vec![f64::NAN]).is_err());
    assert!(Heatmap::tsp(vec![(0, 1)], vec![]).is_err());
}

#[test]
fn oracle_labels_decode_from_one_hot_heatmaps() {
    for seed in 0..10 {
        let inst = labeled_mis(16, seed);
        let Instance::Mis(g) = &inst else { unreachable!() };
        let label = g.label().unwrap();
        let scores = (0..g.n()).map(|v| if label.contains(v) { 1.0 } else { 0.0 }).collect();
        assert_eq!(&mis_greedy_decode(&Heatmap::mis(scores).unwrap(), g), label);
    }
}
