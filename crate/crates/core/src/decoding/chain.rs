use super::{DecodeError, Heatmap};
use crate::denoiser::{Denoise, GraphInput, Prediction, Sample};
use crate::diffusion::{continuous, discrete, Branch, ContinuousMode, InferenceSchedule, NoiseSchedule, StepMode};
use crate::instances::Task;

/// How each branch turns a reverse-step posterior into the next state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepModes {
    pub discrete: StepMode,
    pub continuous: ContinuousMode,
}

/// Output of one reverse chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub heatmap: Heatmap,
    /// The clean state the chain lands on at `t = 0` (argmax of the final
    /// prediction, or its quantization for the continuous branch).
    pub state: Vec<u8>,
}

fn check(
    model: &dyn Denoise,
    sched: &NoiseSchedule,
    inf: &InferenceSchedule,
    graph: &GraphInput,
) -> Result<(), DecodeError> {
    let cfg = model.config();
    if cfg.steps != sched.steps() || inf.total_steps() != sched.steps() {
        return Err(DecodeError::Mismatch(format!(
            "model trained with T = {}, noise schedule has T = {}, inference schedule has T = {}",
            cfg.steps,
            sched.steps(),
            inf.total_steps()
        )));
    }
    if cfg.task != graph.task {
        return Err(DecodeError::Mismatch(format!("model solves {}, instance is {}", cfg.task, graph.task)));
    }
    Ok(())
}

fn heatmap(graph: &GraphInput, scores: Vec<f64>) -> Result<Heatmap, DecodeError> {
    match graph.task {
        Task::Tsp => Heatmap::tsp(graph.src.iter().copied().zip(graph.dst.iter().copied()).collect(), scores),
        Task::Mis => Heatmap::mis(scores),
    }
}

/// Run one reverse chain per generator in `rngs`, in lockstep so each
/// network call evaluates all chains as one batch. Chain `k` draws every
/// random number from `rngs[k]` only, so its result does not depend on how
/// many other chains run beside it.
pub fn run_chains<R: rand::Rng>(
    model: &dyn Denoise,
    sched: &NoiseSchedule,
    inf: &InferenceSchedule,
    graph: &GraphInput,
    modes: StepModes,
    rngs: &mut [R],
) -> Result<Vec<ChainOutput>, DecodeError> {
    check(model, sched, inf, graph)?;
    let len = graph.num_variables();
    let hops = inf.hops();
    match model.config().branch {
        Branch::Discrete => {
            let mut states: Vec<Vec<u8>> =
                rngs.iter_mut().map(|r| discrete::sample_bits(&vec![[0.5, 0.5]; len], r)).collect();
            for &(t, t_prev) in &hops {
                let inputs: Vec<Vec<f64>> = states.iter().map(|s| s.iter().map(|&b| b as f64).collect()).collect();
                let samples: Vec<Sample> = inputs.iter().map(|x| Sample { graph, x, t }).collect();
                let preds = model.predict(&samples)?;
                let mut finished = Vec::new();
                for (k, pred) in preds.into_iter().enumerate() {
                    let Prediction::X0Probs(p0) = pred else {
                        return Err(DecodeError::Mismatch("discrete model returned a noise estimate".into()));
                    };
                    if t_prev == 0 {
                        let scores = p0.iter().map(|p| p[1].clamp(0.0, 1.0)).collect();
                        finished
                            .push(ChainOutput { heatmap: heatmap(graph, scores)?, state: discrete::argmax_bits(&p0) });
                    } else {
                        states[k] =
                            discrete::reverse_step(&states[k], &p0, t_prev, t, sched, &mut rngs[k], modes.discrete)?
                                .bits;
                    }
                }
                if t_prev == 0 {
                    return Ok(finished);
                }
            }
        }
        Branch::Continuous => {
            let mut states: Vec<Vec<f64>> = rngs.iter_mut().map(|r| continuous::standard_normal(len, r)).collect();
            for &(t, t_prev) in &hops {
                let samples: Vec<Sample> = states.iter().map(|x| Sample { graph, x, t }).collect();
                let preds = model.predict(&samples)?;
                let mut finished = Vec::new();
                for (k, pred) in preds.into_iter().enumerate() {
                    let Prediction::Eps(eps) = pred else {
                        return Err(DecodeError::Mismatch("continuous model returned class probabilities".into()));
                    };
                    if t_prev == 0 {
                        let x0 = continuous::predict_x0(&states[k], &eps, t, sched)?;
                        let scores = x0.iter().map(|v| (0.5 * (v + 1.0)).clamp(0.0, 1.0)).collect();
                        finished
                            .push(ChainOutput { heatmap: heatmap(graph, scores)?, state: continuous::quantize(&x0) });
                    } else {
                        states[k] = continuous::reverse_step(
                            &states[k],
                            &eps,
                            t_prev,
                            t,
                            sched,
                            modes.continuous,
                            &mut rngs[k],
                        )?
                        .values;
                    }
                }
                if t_prev == 0 {
                    return Ok(finished);
                }
            }
        }
    }
    unreachable!("every inference schedule ends with a hop to 0")
}

/// A single reverse chain from the prior to `t = 0`.
pub fn run_reverse_chain<R: rand::Rng>(
    model: &dyn Denoise,
    sched: &NoiseSchedule,
    inf: &InferenceSchedule,
    graph: &GraphInput,
    modes: StepModes,
    rng: &mut R,
) -> Result<ChainOutput, DecodeError> {
    let mut rngs = [rng];
    Ok(run_chains(model, sched, inf, graph, modes, &mut rngs)?.pop().expect("one chain"))
}
