use crate::denoiser::DenoiserParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// `peak · cos²(π·step / (2·total))`: `peak` at step 0, zero at `total`.
pub fn cosine_lr(peak: f64, step: u64, total: u64) -> f64 {
    if total == 0 {
        return peak;
    }
    let frac = (step.min(total) as f64) / total as f64;
    let c = (std::f64::consts::FRAC_PI_2 * frac).cos();
    peak * c * c
}

/// Adaptive moment estimation over flat tensor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub steps: u64,
}

impl Adam {
    /// Zeroed moments shaped like `shapes`.
    pub fn new(shapes: &[usize]) -> Self {
        Adam {
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    pub fn for_params(params: &DenoiserParams) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self::new(&shapes)
    }

    /// One bias-corrected update. A zero learning rate still advances the
    /// moments but leaves the parameters bit-for-bit unchanged.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) {
        self.steps += 1;
        let bc1 = 1.0 - BETA1.powf(self.steps as f64);
        let bc2 = 1.0 - BETA2.powf(self.steps as f64);
        for (ti, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[ti];
            let v = &mut self.second[ti];
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                if lr != 0.0 {
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
                }
            }
        }
    }

    pub fn step_params(&mut self, params: &mut DenoiserParams, grads: &DenoiserParams, lr: f64) {
        let g = grads.tensors();
        let mut p = params.tensors_mut();
        self.update(&mut p, &g, lr);
    }
}
