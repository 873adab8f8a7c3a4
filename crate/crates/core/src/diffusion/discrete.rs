//! Bernoulli (binary categorical) diffusion over {0,1}^N.

use super::{DiffusionError, NoiseSchedule};

/// Probabilities `[P(x = 0), P(x = 1)]` for one variable.
pub type Categorical = [f64; 2];

/// A noisy binary solution vector at timestep `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteState {
    pub bits: Vec<u8>,
    pub t: usize,
}

impl DiscreteState {
    pub fn new(bits: Vec<u8>, t: usize) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        DiscreteState { bits, t }
    }

    pub fn one_hot(&self) -> Vec<Categorical> {
        self.bits.iter().map(|&b| one_hot(b)).collect()
    }
}

pub fn one_hot(bit: u8) -> Categorical {
    if bit == 0 {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    }
}

/// Per-variable `x̃_0 Q̄_t`.
pub fn forward_marginal(x0: &[u8], t: usize, sched: &NoiseSchedule) -> Result<Vec<Categorical>, DiffusionError> {
    sched.check_t(t, 1)?;
    let q = sched.q_bar(t);
    Ok(x0.iter().map(|&b| q[b as usize]).collect())
}

/// Draw `x_t ~ q(x_t | x_0)` independently per variable.
pub fn forward_sample(
    x0: &[u8],
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut impl rand::Rng,
) -> Result<DiscreteState, DiffusionError> {
    let probs = forward_marginal(x0, t, sched)?;
    Ok(DiscreteState::new(sample_bits(&probs, rng), t))
}

pub fn sample_bits(probs: &[Categorical], rng: &mut impl rand::Rng) -> Vec<u8> {
    probs.iter().map(|p| u8::from(rng.random::<f64>() < p[1])).collect()
}

/// `1` only when `P(1)` strictly exceeds `P(0)`; exact ties go to 0.
pub fn argmax_bits(probs: &[Categorical]) -> Vec<u8> {
    probs.iter().map(|p| u8::from(p[1] > p[0])).collect()
}

/// Posterior `p(x_{t_prev} | x_t)` with the clean data marginalized over
/// the predicted `x0_probs`:
///
/// `Σ_v p0(v) · [x̃_t Q̄_{t_prev,t}ᵀ ⊙ e_v Q̄_{t_prev}] / (e_v Q̄_t x̃_tᵀ)`
///
/// Adjacent steps are the case `t_prev = t - 1`.
pub fn posterior(
    xt: &[u8],
    x0_probs: &[Categorical],
    t_prev: usize,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<Vec<Categorical>, DiffusionError> {
    sched.check_pair(t_prev, t)?;
    if xt.len() != x0_probs.len() {
        return Err(DiffusionError::ShapeMismatch { expected: xt.len(), got: x0_probs.len() });
    }
    let skip = sched.q_bar_between(t_prev, t);
    let q_prev = sched.q_bar(t_prev);
    let q_t = sched.q_bar(t);
    xt.iter()
        .zip(x0_probs)
        .map(|(&b, p0)| {
            let b = b as usize;
            let mut out = [0.0; 2];
            for v in 0..2 {
                if p0[v] == 0.0 {
                    continue;
                }
                let denom = q_t[v][b];
                if !(denom > 0.0) {
                    return Err(DiffusionError::Degenerate(format!("q(x_t = {b} | x_0 = {v}) = {denom} at t = {t}")));
                }
                for a in 0..2 {
                    out[a] += p0[v] * skip[a][b] * q_prev[v][a] / denom;
                }
            }
            Ok(out)
        })
        .collect()
}

/// How a reverse step turns posterior parameters into a state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum StepMode {
    #[default]
    Sample,
    Argmax,
}

impl std::str::FromStr for StepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sample" => Ok(StepMode::Sample),
            "argmax" => Ok(StepMode::Argmax),
            other => Err(format!("unknown discrete step `{other}` (expected sample or argmax)")),
        }
    }
}

pub fn reverse_step(
    xt: &[u8],
    x0_probs: &[Categorical],
    t_prev: usize,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut impl rand::Rng,
    mode: StepMode,
) -> Result<DiscreteState, DiffusionError> {
    let post = posterior(xt, x0_probs, t_prev, t, sched)?;
    let bits = match mode {
        StepMode::Sample => sample_bits(&post, rng),
        StepMode::Argmax => argmax_bits(&post),
    };
    Ok(DiscreteState::new(bits, t_prev))
}
