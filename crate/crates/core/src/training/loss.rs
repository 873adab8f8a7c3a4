use ndarray::{Array2, ArrayView2};

use super::TrainError;

/// Mean cross-entropy between `softmax(logits)` and the one-hot targets,
/// and its gradient with respect to the logits.
pub fn loss_discrete(logits: ArrayView2<f64>, x0: &[u8]) -> Result<(f64, Array2<f64>), TrainError> {
    if logits.ncols() != 2 || logits.nrows() != x0.len() {
        return Err(TrainError::ShapeMismatch(format!("logits {:?} against {} targets", logits.dim(), x0.len())));
    }
    let n = x0.len().max(1) as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut total = 0.0;
    for (i, (row, &bit)) in logits.rows().into_iter().zip(x0).enumerate() {
        let top = row[0].max(row[1]);
        let lse = top + ((row[0] - top).exp() + (row[1] - top).exp()).ln();
        let target = bit as usize;
        total += lse - row[target];
        for c in 0..2 {
            let p = (row[c] - lse).exp();
            grad[[i, c]] = (p - if c == target { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok((total / n, grad))
}

/// Mean squared error between predicted and true noise, and its gradient.
pub fn loss_continuous(pred: ArrayView2<f64>, eps: &[f64]) -> Result<(f64, Array2<f64>), TrainError> {
    if pred.ncols() != 1 || pred.nrows() != eps.len() {
        return Err(TrainError::ShapeMismatch(format!("predictions {:?} against {} targets", pred.dim(), eps.len())));
    }
    let n = eps.len().max(1) as f64;
    let mut grad = Array2::zeros(pred.dim());
    let mut total = 0.0;
    for (i, (&p, &e)) in pred.column(0).iter().zip(eps).enumerate() {
        let diff = p - e;
        total += diff * diff;
        grad[[i, 0]] = 2.0 * diff / n;
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    /// Scalar cross-entropy: -ln(e^{z_y} / (e^{z_0} + e^{z_1})).
    fn reference_ce(z: [f64; 2], y: usize) -> f64 {
        -(z[y].exp() / (z[0].exp() + z[1].exp())).ln()
    }

    #[test]
    fn saturated_logits_give_zero_loss() {
        let logits = array![[20.0, -20.0], [-20.0, 20.0]];
        let (loss, _) = loss_discrete(logits.view(), &[0, 1]).unwrap();
        assert!(loss < 1e-8);
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let logits = Array2::zeros((5, 2));
        let (loss, _) = loss_discrete(logits.view(), &[0, 1, 1, 0, 1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn discrete_matches_scalar_reference() {
        let mut r = rng::stream(1, 0);
        let logits = Array2::from_shape_fn((40, 2), |_| r.random_range(-5.0..5.0));
        let bits: Vec<u8> = (0..40).map(|_| r.random_range(0..2)).collect();
        let (loss, grad) = loss_discrete(logits.view(), &bits).unwrap();
        let expect: f64 =
            (0..40).map(|i| reference_ce([logits[[i, 0]], logits[[i, 1]]], bits[i] as usize)).sum::<f64>() / 40.0;
        assert!((loss - expect).abs() < 1e-12);
        // gradient against central differences of the scalar reference
        for i in 0..40 {
            for c in 0..2 {
                let mut z = [logits[[i, 0]], logits[[i, 1]]];
                z[c] += 1e-6;
                let up = reference_ce(z, bits[i] as usize);
                z[c] -= 2e-6;
                let down = reference_ce(z, bits[i] as usize);
                assert!((grad[[i, c]] - (up - down) / 2e-6 / 40.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn continuous_cases() {
        let eps = [0.3, -1.2, 2.0];
        let exact = array![[0.3], [-1.2], [2.0]];
        assert_eq!(loss_continuous(exact.view(), &eps).unwrap().0, 0.0);
        let shifted = exact.mapv(|v| v + 0.5);
        assert!((loss_continuous(shifted.view(), &eps).unwrap().0 - 0.25).abs() < 1e-15);

        let mut r = rng::stream(2, 0);
        let pred = Array2::from_shape_fn((30, 1), |_| r.random_range(-3.0..3.0));
        let target: Vec<f64> = (0..30).map(|_| r.random_range(-3.0..3.0)).collect();
        let expect = (0..30).map(|i| (pred[[i, 0]] - target[i]).powi(2)).sum::<f64>() / 30.0;
        assert!((loss_continuous(pred.view(), &target).unwrap().0 - expect).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        assert!(loss_discrete(Array2::zeros((2, 2)).view(), &[0]).is_err());
        assert!(loss_discrete(Array2::zeros((1, 1)).view(), &[0]).is_err());
        assert!(loss_continuous(Array2::zeros((2, 2)).view(), &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn losses_are_nonnegative(z0 in -50.0f64..50.0, z1 in -50.0f64..50.0, b in 0u8..2, p in -9.0f64..9.0, e in -9.0f64..9.0) {
            let logits = array![[z0, z1]];
            prop_assert!(loss_discrete(logits.view(), &[b]).unwrap().0 >= 0.0);
            let pred = array![[p]];
            prop_assert!(loss_continuous(pred.view(), &[e]).unwrap().0 >= 0.0);
        }
    }
}
