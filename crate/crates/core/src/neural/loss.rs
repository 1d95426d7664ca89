/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Cross-entropy of `softmax(logits)` against `label`, via log-sum-exp.
/// Writes `softmax - onehot` into `dlogits` and returns the loss.
pub fn softmax_cross_entropy_into(logits: &[f64], label: usize, dlogits: &mut [f64]) -> f64 {
    let top = argmax(logits);
    let max = logits[top];
    // sum = 1 + rest, with the max term kept out so ln_1p keeps tiny losses
    let mut rest = 0.0;
    for (i, (d, &z)) in dlogits.iter_mut().zip(logits).enumerate() {
        *d = (z - max).exp();
        if i != top {
            rest += *d;
        }
    }
    let sum = 1.0 + rest;
    for d in dlogits.iter_mut() {
        *d /= sum;
    }
    dlogits[label] -= 1.0;
    rest.ln_1p() + (max - logits[label])
}

pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut d = vec![0.0; logits.len()];
    let loss = softmax_cross_entropy_into(logits, label, &mut d);
    (loss, d)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_eight() {
        let (loss, d) = softmax_cross_entropy(&[0.3; 8], 5);
        assert!((loss - 8f64.ln()).abs() < 1e-15);
        assert!((d[5] - (0.125 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn large_margin_drives_loss_to_zero() {
        let mut prev = f64::INFINITY;
        for margin in [1.0, 10.0, 100.0, 700.0] {
            let mut logits = [0.0; 8];
            logits[2] = margin;
            let (loss, _) = softmax_cross_entropy(&logits, 2);
            assert!(loss.is_finite() && loss >= 0.0 && loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-300);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let logits = [1.5, -2.0, 0.3, 4.0, -0.7, 0.0, 2.2, -3.1];
        let (_, d) = softmax_cross_entropy(&logits, 6);
        assert!(d.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn softmax_is_probability_vector() {
        let p = softmax(&[700.0, -700.0, 3.0, 0.0]);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.125; 8]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0, 1.0]), 1);
    }
}
