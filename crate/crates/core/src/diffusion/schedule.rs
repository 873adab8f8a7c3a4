use super::DiffusionError;

/// 2x2 row-stochastic transition matrix over the states {0, 1}.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// One-step flip matrix `[[1 - beta, beta], [beta, 1 - beta]]`.
pub fn flip_matrix(beta: f64) -> Mat2 {
    [[1.0 - beta, beta], [beta, 1.0 - beta]]
}

/// Per-step corruption ratios and everything derived from them.
///
/// Index conventions: `beta(t)` and `q(t)` are defined for `1..=T`;
/// `alpha_bar(t)` and `q_bar(t)` for `0..=T` with the `t = 0` entries equal to
/// 1 and the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
    q_bars: Vec<Mat2>,
}

impl NoiseSchedule {
    /// Linear ramp from `beta_start` to `beta_end` over `steps` steps, inclusive.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self, DiffusionError> {
        if steps == 0 {
            return Err(DiffusionError::InvalidSchedule("T must be at least 1".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(DiffusionError::InvalidSchedule(format!(
                "need 0 < beta_1 <= beta_T < 1, got beta_1 = {beta_start}, beta_T = {beta_end}"
            )));
        }
        let betas = if steps == 1 {
            vec![beta_start]
        } else {
            (0..steps).map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64).collect()
        };
        Self::from_betas(betas)
    }

    /// Arbitrary per-step ratios, each strictly inside (0, 1).
    pub fn from_betas(betas: Vec<f64>) -> Result<Self, DiffusionError> {
        if betas.is_empty() {
            return Err(DiffusionError::InvalidSchedule("T must be at least 1".into()));
        }
        if let Some((i, b)) = betas.iter().enumerate().find(|(_, b)| !(**b > 0.0 && **b < 1.0)) {
            return Err(DiffusionError::InvalidSchedule(format!("beta_{} = {b} not in (0, 1)", i + 1)));
        }
        let mut alpha_bars = Vec::with_capacity(betas.len() + 1);
        let mut q_bars = Vec::with_capacity(betas.len() + 1);
        alpha_bars.push(1.0);
        q_bars.push(IDENTITY);
        for &b in &betas {
            alpha_bars.push(alpha_bars.last().unwrap() * (1.0 - b));
            q_bars.push(matmul2(q_bars.last().unwrap(), &flip_matrix(b)));
        }
        Ok(NoiseSchedule { betas, alpha_bars, q_bars })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.betas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub fn q(&self, t: usize) -> Mat2 {
        flip_matrix(self.betas[t - 1])
    }

    pub fn q_bar(&self, t: usize) -> Mat2 {
        self.q_bars[t]
    }

    /// `Q_{from+1} ... Q_to`; the identity when `from == to`.
    pub fn q_bar_between(&self, from: usize, to: usize) -> Mat2 {
        (from + 1..=to).fold(IDENTITY, |acc, s| matmul2(&acc, &self.q(s)))
    }

    pub(crate) fn check_t(&self, t: usize, min: usize) -> Result<(), DiffusionError> {
        if t < min || t > self.steps() {
            return Err(DiffusionError::TimestepOutOfRange { t, min, max: self.steps() });
        }
        Ok(())
    }

    pub(crate) fn check_pair(&self, t_prev: usize, t: usize) -> Result<(), DiffusionError> {
        self.check_t(t, 1)?;
        if t_prev >= t {
            return Err(DiffusionError::TimestepOutOfRange { t: t_prev, min: 0, max: t - 1 });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let s = NoiseSchedule::linear(1, 0.3, 0.5).unwrap();
        assert_eq!(s.steps(), 1);
        assert_eq!(s.beta(1), 0.3);
        assert_eq!(s.alpha_bar(1), 0.7);
    }

    #[test]
    fn default_schedule_terminal_alpha_bar() {
        let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
        // direct product of (1 - beta_t), evaluated at 50 significant digits
        let golden = 4.035_829_765_375_683_3e-5;
        assert!((s.alpha_bar(1000) - golden).abs() / golden < 1e-12);
        assert!(s.alpha_bar(1000) < 1e-3);
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(1000) - 0.02).abs() < 1e-15);
        for t in 2..=1000 {
            assert!(s.beta(t) >= s.beta(t - 1));
        }
    }

    #[test]
    fn flip_matrix_definition() {
        assert_eq!(flip_matrix(0.1), [[0.9, 0.1], [0.1, 0.9]]);
    }

    #[test]
    fn cumulative_products_consistent() {
        let s = NoiseSchedule::linear(200, 1e-3, 0.3).unwrap();
        for t in 1..=200 {
            let q = s.q(t);
            for row in q {
                assert!((row[0] + row[1] - 1.0).abs() < 1e-15);
            }
            let expect = matmul2(&s.q_bar(t - 1), &q);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((s.q_bar(t)[i][j] - expect[i][j]).abs() < 1e-12);
                }
            }
        }
        assert_eq!(s.q_bar_between(7, 7), IDENTITY);
        let direct = s.q_bar_between(0, 50);
        for i in 0..2 {
            for j in 0..2 {
                assert!((direct[i][j] - s.q_bar(50)[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(NoiseSchedule::linear(0, 1e-4, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.03, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 1e-4, 1.0).is_err());
        assert!(NoiseSchedule::from_betas(vec![0.1, 0.0]).is_err());
    }
}
