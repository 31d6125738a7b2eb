//! Binary cross-entropy over a two-logit head, realized as softmax
//! cross-entropy (the Bernoulli likelihood when the two logits are tied).

use crate::error::{Error, Result};

/// Mean cross-entropy between `softmax(logits)` and the one-hot labels,
/// plus the gradient w.r.t. the logits, `(softmax - onehot) / batch`.
/// `logits` is a flattened `[batch, 2]` matrix; labels are 0 or 1.
pub fn bce_loss(logits: &[f32], labels: &[u8]) -> Result<(f64, Vec<f32>)> {
    let batch = labels.len();
    if batch == 0 {
        return Err(Error::Parameter("empty batch in loss".into()));
    }
    if logits.len() != 2 * batch {
        return Err(Error::Dimension(format!(
            "{} logits for {} labels",
            logits.len(),
            batch
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Parameter(format!("label {bad} outside {{0, 1}}")));
    }
    let mut loss = 0.0f64;
    let mut grad = vec![0.0f32; logits.len()];
    let inv_b = 1.0 / batch as f64;
    for (b, &label) in labels.iter().enumerate() {
        let (l0, l1) = (logits[2 * b] as f64, logits[2 * b + 1] as f64);
        // Max-subtraction keeps the exponentials bounded by 1.
        let m = l0.max(l1);
        let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
        let z = e0 + e1;
        let (p0, p1) = (e0 / z, e1 / z);
        let p_true = if label == 0 { p0 } else { p1 };
        loss -= p_true.ln() * inv_b;
        grad[2 * b] = ((p0 - f64::from(label == 0)) * inv_b) as f32;
        grad[2 * b + 1] = ((p1 - f64::from(label == 1)) * inv_b) as f32;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn symmetric_logits_give_ln2_and_half_gradient() {
        let (loss, grad) = bce_loss(&[0.0, 0.0], &[1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((grad[0] - 0.5).abs() < 1e-7);
        assert!((grad[1] + 0.5).abs() < 1e-7);
    }

    #[test]
    fn saturated_correct_prediction_has_negligible_loss() {
        let (loss, _) = bce_loss(&[20.0, -20.0], &[0]).unwrap();
        assert!(loss < 1e-8, "loss {loss}");
    }

    #[test]
    fn softmax_probabilities_sum_to_one() {
        // Reconstruct the softmax from the gradient: p = grad*batch + onehot.
        let logits = [3.0f32, -1.5, 0.2, 0.9, -7.0, 6.0];
        let labels = [0u8, 1, 1];
        let (_, grad) = bce_loss(&logits, &labels).unwrap();
        for (b, &label) in labels.iter().enumerate() {
            let p0 = grad[2 * b] as f64 * 3.0 + f64::from(label == 0);
            let p1 = grad[2 * b + 1] as f64 * 3.0 + f64::from(label == 1);
            assert!((p0 + p1 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(31);
        for _ in 0..10 {
            let batch = rng.int_in(1, 6) as usize;
            let logits: Vec<f32> =
                (0..2 * batch).map(|_| rng.uniform_in(-3.0, 3.0) as f32).collect();
            let labels: Vec<u8> = (0..batch).map(|_| rng.int_in(0, 1) as u8).collect();
            let (_, grad) = bce_loss(&logits, &labels).unwrap();
            let eps = 1e-4f32;
            for i in 0..logits.len() {
                let mut plus = logits.clone();
                plus[i] += eps;
                let mut minus = logits.clone();
                minus[i] -= eps;
                let (lp, _) = bce_loss(&plus, &labels).unwrap();
                let (lm, _) = bce_loss(&minus, &labels).unwrap();
                // Divide by the realized f32 step, not the nominal one.
                let fd = (lp - lm) / (plus[i] as f64 - minus[i] as f64);
                let ga = grad[i] as f64;
                let denom = ga.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (ga - fd).abs() / denom < 1e-4 || (ga - fd).abs() < 1e-7,
                    "component {i}: analytic {ga}, fd {fd}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(bce_loss(&[], &[]).is_err());
        assert!(bce_loss(&[0.0, 0.0], &[2]).is_err());
        assert!(bce_loss(&[0.0, 0.0, 0.0], &[0]).is_err());
    }
}
