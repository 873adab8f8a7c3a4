use super::DenoiserError;

/// Coordinates in the unit square are stretched by this factor before the
/// sinusoidal encoding so the highest frequencies resolve small distances.
pub const POSITION_SCALE: f64 = 50.0;

/// Interleaved `[sin(t·ω_0), cos(t·ω_0), sin(t·ω_1), ...]` with
/// `ω_k = 10000^(-2k/dim)`.
pub fn sinusoidal_embedding(t: usize, dim: usize) -> Result<Vec<f64>, DenoiserError> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(DenoiserError::InvalidConfig(format!("embedding width {dim} must be even and positive")));
    }
    let mut out = vec![0.0; dim];
    encode_into(t as f64, &mut out);
    Ok(out)
}

/// Same encoding as [`sinusoidal_embedding`] for a real value; an odd-length
/// buffer ends with one extra sine term.
pub(crate) fn encode_into(value: f64, out: &mut [f64]) {
    let dim = out.len();
    let span = (dim + dim % 2) as f64;
    for (k, pair) in out.chunks_mut(2).enumerate() {
        let freq = 10000f64.powf(-((2 * k) as f64) / span);
        let angle = value * freq;
        pair[0] = angle.sin();
        if pair.len() > 1 {
            pair[1] = angle.cos();
        }
    }
}

/// Node position features: each coordinate encoded at half the width,
/// concatenated.
pub(crate) fn position_features(point: [f64; 2], dim: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), dim);
    let half = dim / 2;
    let (x, y) = out.split_at_mut(half);
    encode_into(point[0] * POSITION_SCALE, x);
    encode_into(point[1] * POSITION_SCALE, y);
}
