use super::DiffusionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

impl std::str::FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "cosine" => Ok(ScheduleKind::Cosine),
            other => Err(format!("unknown schedule `{other}` (expected linear or cosine)")),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Cosine => "cosine",
        })
    }
}

/// Strictly increasing timestep subsequence `τ_1 < ... < τ_M = T` visited by
/// the reverse chain, which then takes a final hop to 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceSchedule {
    taus: Vec<usize>,
    kind: ScheduleKind,
    total: usize,
}

impl InferenceSchedule {
    /// - linear: `τ_i = round(i·T/M)`
    /// - cosine: `τ_i = ⌊cos((1 - i/M)·π/2)·T⌋`, clamped to at least 1 and
    ///   deduplicated, so the cosine form may hold fewer than `M` entries.
    ///
    /// `M = T` always yields every step `1..=T`.
    pub fn new(steps: usize, total: usize, kind: ScheduleKind) -> Result<Self, DiffusionError> {
        if steps == 0 || steps > total {
            return Err(DiffusionError::InvalidSchedule(format!(
                "inference steps M = {steps} must lie in [1, T = {total}]"
            )));
        }
        let taus = if steps == total {
            (1..=total).collect()
        } else {
            match kind {
                ScheduleKind::Linear => (1..=steps).map(|i| (2 * i * total + steps) / (2 * steps)).collect(),
                ScheduleKind::Cosine => {
                    let mut taus: Vec<usize> = (1..=steps)
                        .map(|i| {
                            let frac = 1.0 - i as f64 / steps as f64;
                            let v = ((frac * std::f64::consts::FRAC_PI_2).cos() * total as f64).floor();
                            (v as usize).clamp(1, total)
                        })
                        .collect();
                    taus.dedup();
                    taus
                }
            }
        };
        Ok(InferenceSchedule { taus, kind, total })
    }

    pub fn taus(&self) -> &[usize] {
        &self.taus
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn total_steps(&self) -> usize {
        self.total
    }

    /// Number of network evaluations.
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Reverse hops `(t, t_prev)`: `τ_M → τ_{M-1} → ... → τ_1 → 0`.
    pub fn hops(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.taus.len());
        for i in (0..self.taus.len()).rev() {
            let prev = if i == 0 { 0 } else { self.taus[i - 1] };
            out.push((self.taus[i], prev));
        }
        out
    }
}
