use crate::order::{find_cycle, Relation};

use super::ScoreMatrix;

/// Pairs scoring strictly above `threshold`. With `enforce_acyclic`, the
/// lowest-scoring edge of a remaining cycle is removed until none is left.
pub fn decode(scores: &ScoreMatrix, threshold: f64, enforce_acyclic: bool) -> Relation {
    let n = scores.n();
    let mut rel = Relation::empty(n);
    for i in 0..n {
        for j in 0..n {
            if scores.get(i, j) > threshold {
                rel.insert(i, j).expect("indices in range");
            }
        }
    }
    if enforce_acyclic {
        while let Some(cycle) = find_cycle(&rel) {
            let (a, b) = cycle
                .windows(2)
                .map(|w| (w[0], w[1]))
                .min_by(|x, y| scores.get(x.0, x.1).total_cmp(&scores.get(y.0, y.1)))
                .expect("cycle has an edge");
            rel.remove(a, b);
        }
    }
    rel
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: Vec<f64>) -> ScoreMatrix {
        let n = (v.len() as f64).sqrt() as usize;
        ScoreMatrix::new(n, v).unwrap()
    }

    #[test]
    fn threshold_at_zero() {
        let r = decode(&m(vec![-1.0, 3.0, -2.0, -1.0]), 0.0, false);
        assert_eq!(r.pairs().collect::<Vec<_>>(), vec![(0, 1)]);
        assert!(decode(&m(vec![-1.0; 4]), 0.0, false).is_empty());
        assert!(decode(&m(vec![0.0; 4]), 0.0, false).is_empty());
    }

    #[test]
    fn cycle_repair_drops_weakest_edge() {
        let s = m(vec![-1.0, 2.0, 1.0, -1.0]);
        assert_eq!(decode(&s, 0.0, false).len(), 2);
        assert_eq!(decode(&s, 0.0, true).pairs().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn self_loop_repair() {
        let s = m(vec![0.5, 2.0, -1.0, -1.0]);
        assert_eq!(decode(&s, 0.0, true).pairs().collect::<Vec<_>>(), vec![(0, 1)]);
    }
}
