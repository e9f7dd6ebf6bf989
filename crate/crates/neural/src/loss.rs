use crate::{log_sum_exp, Float};

/// Cross-entropy of a softmax restricted to `candidates`.
///
/// Logits outside the candidate set take no part in the normalisation and
/// receive zero gradient. Returns `(loss, dLoss/dlogits)`.
///
/// Panics if `gold` is not one of `candidates`.
pub fn masked_softmax_xent<F: Float>(logits: &[F], candidates: &[usize], gold: usize) -> (F, Vec<F>) {
    assert!(candidates.contains(&gold), "gold label outside candidate set");
    let sub: Vec<F> = candidates.iter().map(|&c| logits[c]).collect();
    let lse = log_sum_exp(&sub);
    let loss = lse - logits[gold];
    let mut grad = vec![F::zero(); logits.len()];
    for (&c, &z) in candidates.iter().zip(&sub) {
        grad[c] = (z - lse).exp();
    }
    grad[gold] -= F::one();
    (loss, grad)
}

/// Index of the largest logit among `candidates`; ties go to the earlier candidate.
pub fn masked_argmax<F: Float>(logits: &[F], candidates: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for &c in candidates {
        match best {
            Some((_, b)) if logits[c] <= b => {}
            _ => best = Some((c, logits[c])),
        }
    }
    best.map(|(c, _)| c)
}

/// Plain softmax cross-entropy over all logits.
pub fn softmax_xent<F: Float>(logits: &[F], gold: usize) -> (F, Vec<F>) {
    let all: Vec<usize> = (0..logits.len()).collect();
    masked_softmax_xent(logits, &all, gold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_logits_get_no_gradient() {
        let (loss, grad) = masked_softmax_xent(&[1.0f64, 100.0, 2.0], &[0, 2], 2);
        let expected = (1f64.exp() + 2f64.exp()).ln() - 2.0;
        assert!((loss - expected).abs() < 1e-12);
        assert_eq!(grad[1], 0.0);
        assert!((grad[0] + grad[2]).abs() < 1e-12);
    }

    #[test]
    fn argmax_ignores_masked_entries() {
        assert_eq!(masked_argmax(&[1.0f32, 9.0, 2.0], &[0, 2]), Some(2));
        assert_eq!(masked_argmax::<f32>(&[1.0], &[]), None);
    }
}
