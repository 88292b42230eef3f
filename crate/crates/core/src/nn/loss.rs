//! Class-imbalance pair loss over an `N×N` score matrix:
//!
//! `log(1 + Σ_{(i,j)∉L} exp(s_ij)) + log(1 + Σ_{(i,j)∈L} exp(-s_ij))`
//!
//! Both terms are evaluated as a log-sum-exp that includes the implicit zero
//! logit, so large scores never overflow.

use super::NnError;

/// Loss value and its gradient with respect to every score.
#[derive(Clone, Debug, PartialEq)]
pub struct PairLoss {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// `log(exp(0) + Σ exp(x))`.
fn log1p_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(0.0_f64, f64::max);
    let s: f64 = (-m).exp() + xs.iter().map(|&x| (x - m).exp()).sum::<f64>();
    m + s.ln()
}

/// `positive[i*n + j]` marks label pairs. With `mask_diagonal`, the `(i, i)`
/// entries are left out of the negative set (they still count if labelled).
pub fn pair_loss(scores: &[f64], n: usize, positive: &[bool], mask_diagonal: bool) -> Result<PairLoss, NnError> {
    if scores.len() != n * n || positive.len() != n * n {
        return Err(NnError::Shape(format!(
            "pair loss expects {n}x{n} scores and labels, got {} and {}",
            scores.len(),
            positive.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(NnError::NonFinite(format!("score {bad}")));
    }
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for (idx, (&s, &p)) in scores.iter().zip(positive).enumerate() {
        if p {
            pos.push(-s);
        } else if !(mask_diagonal && idx / n == idx % n) {
            neg.push(s);
        }
    }
    let neg_lse = log1p_sum_exp(&neg);
    let pos_lse = log1p_sum_exp(&pos);
    let grad = scores
        .iter()
        .zip(positive)
        .enumerate()
        .map(|(idx, (&s, &p))| {
            if p {
                -(-s - pos_lse).exp()
            } else if mask_diagonal && idx / n == idx % n {
                0.0
            } else {
                (s - neg_lse).exp()
            }
        })
        .collect();
    Ok(PairLoss {
        value: neg_lse + pos_lse,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_with_zero_logit() {
        assert!((log1p_sum_exp(&[]) - 0.0).abs() < 1e-15);
        assert!((log1p_sum_exp(&[0.0, 0.0]) - 3f64.ln()).abs() < 1e-15);
        assert!((log1p_sum_exp(&[1000.0]) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn masked_diagonal_drops_from_negatives() {
        let labels = [false, true, false, false];
        let full = pair_loss(&[0.0; 4], 2, &labels, false).unwrap();
        let masked = pair_loss(&[0.0; 4], 2, &labels, true).unwrap();
        assert!((full.value - (4f64.ln() + 2f64.ln())).abs() < 1e-12);
        assert!((masked.value - (2f64.ln() + 2f64.ln())).abs() < 1e-12);
        assert_eq!(masked.grad[0], 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            pair_loss(&[f64::NAN], 1, &[false], false),
            Err(NnError::NonFinite(_))
        ));
    }
}
