//! Losses paired with their output activations.

use super::layers::{sigmoid, softmax};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn bce_loss(p_hat: f64, y: f64) -> f64 {
    let p = p_hat.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Sigmoid followed by clamped binary cross-entropy. Returns the loss and its
/// derivative with respect to the logit, `p - y` inside the clamp range and 0
/// where the clamp is active.
pub fn bce_with_logit(z: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(z);
    let clamped = !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p);
    (bce_loss(p, y), if clamped { 0.0 } else { p - y })
}

pub fn softmax_ce_loss(logits: &[f64], class: usize) -> f64 {
    softmax_ce_with_grad(logits, class).0
}

/// Softmax cross-entropy with its gradient `softmax - onehot`.
pub fn softmax_ce_with_grad(logits: &[f64], class: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    let mut grad = softmax(logits);
    grad[class] -= 1.0;
    (lse - logits[class], grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(1.0 - 1e-7, 1.0) - 1e-7).abs() < 1e-12);
        assert!(bce_loss(1.0, 0.0).is_finite());
        assert!((softmax_ce_loss(&[0.0, 0.0], 1) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let h = 1e-5;
        for &(z, y) in &[(0.3, 1.0), (-1.7, 0.0), (2.5, 0.0), (-0.2, 1.0)] {
            let (_, d) = bce_with_logit(z, y);
            let fd = (bce_with_logit(z + h, y).0 - bce_with_logit(z - h, y).0) / (2.0 * h);
            assert!((d - fd).abs() <= 1e-4 * d.abs().max(1e-6), "z={z} y={y}: {d} vs {fd}");
            assert!((d - (sigmoid(z) - y)).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_logit_has_zero_gradient() {
        assert_eq!(bce_with_logit(40.0, 0.0).1, 0.0);
        assert_eq!(bce_with_logit(-40.0, 0.0).1, 0.0);
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let logits = [0.4, -1.1, 2.0];
        let (_, g) = softmax_ce_with_grad(&logits, 1);
        let h = 1e-5;
        for k in 0..3 {
            let mut a = logits;
            let mut b = logits;
            a[k] += h;
            b[k] -= h;
            let fd = (softmax_ce_loss(&a, 1) - softmax_ce_loss(&b, 1)) / (2.0 * h);
            assert!((g[k] - fd).abs() < 1e-8);
        }
    }
}
