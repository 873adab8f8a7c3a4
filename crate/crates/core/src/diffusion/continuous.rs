//! Gaussian diffusion over the {-1, 1} lift of binary solution vectors.

use rand_distr::{Distribution, StandardNormal};

use super::{DiffusionError, NoiseSchedule};

/// A real-valued noisy solution at timestep `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousState {
    pub values: Vec<f64>,
    pub t: usize,
}

/// Map {0, 1} to {-1, 1}.
pub fn rescale(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { -1.0 } else { 1.0 }).collect()
}

/// Threshold at the midpoint of {-1, 1}: `x >= 0` maps to 1.
pub fn quantize(values: &[f64]) -> Vec<u8> {
    values.iter().map(|&x| u8::from(x >= 0.0)).collect()
}

pub fn standard_normal(len: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// `x̂_t = √ᾱ_t x̂_0 + √(1 - ᾱ_t) ε`. Returns the state and the drawn ε.
/// `t = 0` is accepted and returns `x̂_0` unchanged.
pub fn forward_sample(
    x0: &[u8],
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut impl rand::Rng,
) -> Result<(ContinuousState, Vec<f64>), DiffusionError> {
    sched.check_t(t, 0)?;
    let eps = standard_normal(x0.len(), rng);
    Ok((ContinuousState { values: noised(&rescale(x0), &eps, t, sched), t }, eps))
}

/// Deterministic forward map for a given ε.
pub fn noised(x0_hat: &[f64], eps: &[f64], t: usize, sched: &NoiseSchedule) -> Vec<f64> {
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0_hat.iter().zip(eps).map(|(&x, &e)| a * x + b * e).collect()
}

/// Point estimate `x̂_0 = (x̂_t - √(1 - ᾱ_t) ε̃) / √ᾱ_t`.
pub fn predict_x0(xt: &[f64], pred_eps: &[f64], t: usize, sched: &NoiseSchedule) -> Result<Vec<f64>, DiffusionError> {
    let ab = sched.alpha_bar(t);
    if !(ab > 0.0) {
        return Err(DiffusionError::Degenerate(format!("alpha_bar({t}) = {ab}")));
    }
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(xt.iter().zip(pred_eps).map(|(&x, &e)| (x - b * e) / a).collect())
}

/// Coefficients of the Gaussian posterior `q(x̂_{t'} | x̂_t, x̂_0)` for the
/// respaced chain: mean `c0 · x̂_0 + ct · x̂_t`, variance `var`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPosterior {
    pub coef_x0: f64,
    pub coef_xt: f64,
    pub variance: f64,
}

pub fn gaussian_posterior(t_prev: usize, t: usize, sched: &NoiseSchedule) -> Result<GaussianPosterior, DiffusionError> {
    sched.check_pair(t_prev, t)?;
    let ab_t = sched.alpha_bar(t);
    let ab_p = sched.alpha_bar(t_prev);
    let alpha = ab_t / ab_p;
    let beta = 1.0 - alpha;
    let denom = 1.0 - ab_t;
    if !(denom > 0.0) || !(ab_p > 0.0) {
        return Err(DiffusionError::Degenerate(format!("posterior undefined for {t_prev} <- {t}")));
    }
    Ok(GaussianPosterior {
        coef_x0: ab_p.sqrt() * beta / denom,
        coef_xt: alpha.sqrt() * (1.0 - ab_p) / denom,
        variance: (1.0 - ab_p) / denom * beta,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ContinuousMode {
    /// Sample the closed-form Gaussian posterior.
    Ddpm,
    /// Deterministic implicit step.
    #[default]
    Ddim,
}

impl std::str::FromStr for ContinuousMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ddpm" => Ok(ContinuousMode::Ddpm),
            "ddim" => Ok(ContinuousMode::Ddim),
            other => Err(format!("unknown continuous step `{other}` (expected ddpm or ddim)")),
        }
    }
}

/// One reverse hop `t -> t_prev` given the predicted noise.
pub fn reverse_step(
    xt: &[f64],
    pred_eps: &[f64],
    t_prev: usize,
    t: usize,
    sched: &NoiseSchedule,
    mode: ContinuousMode,
    rng: &mut impl rand::Rng,
) -> Result<ContinuousState, DiffusionError> {
    sched.check_pair(t_prev, t)?;
    if xt.len() != pred_eps.len() {
        return Err(DiffusionError::ShapeMismatch { expected: xt.len(), got: pred_eps.len() });
    }
    let x0 = predict_x0(xt, pred_eps, t, sched)?;
    let values = match mode {
        ContinuousMode::Ddim => noised(&x0, pred_eps, t_prev, sched),
        ContinuousMode::Ddpm => {
            let post = gaussian_posterior(t_prev, t, sched)?;
            let std = post.variance.sqrt();
            x0.iter()
                .zip(xt)
                .map(|(&a, &b)| {
                    let mean = post.coef_x0 * a + post.coef_xt * b;
                    if std > 0.0 {
                        let z: f64 = StandardNormal.sample(rng);
                        mean + std * z
                    } else {
                        mean
                    }
                })
                .collect()
        }
    };
    Ok(ContinuousState { values, t: t_prev })
}
