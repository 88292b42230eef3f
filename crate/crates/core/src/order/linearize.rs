use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{find_cycle, OrderError, Relation};

/// Largest element count accepted by [`best_permutation_recall`].
pub const BRUTE_FORCE_LIMIT: usize = 9;

/// How [`topological_linearization`] chooses among currently unconstrained elements.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Smallest element index first.
    #[default]
    Index,
    /// Smallest key first, comparing lexicographically (e.g. `[top, left]` for
    /// top-to-bottom then left-to-right); equal keys fall back to index.
    Geometry(Vec<[i64; 2]>),
}

/// Relation holding exactly the adjacent pairs of a permutation of `0..perm.len()`.
pub fn permutation_to_relation(perm: &[usize]) -> Result<Relation, OrderError> {
    let n = perm.len();
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n {
            return Err(OrderError::InvalidPermutation(format!("index {p} out of range 0..{n}")));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(OrderError::InvalidPermutation(format!("index {p} repeated")));
        }
    }
    Relation::new(n, perm.windows(2).map(|w| (w[0], w[1])))
}

/// Kahn's algorithm with a deterministic priority among ready elements.
/// Every pair `(i, j)` of `rel` places `i` before `j` in the result.
pub fn topological_linearization(rel: &Relation, tie_break: &TieBreak) -> Result<Vec<usize>, OrderError> {
    let n = rel.element_count();
    if let Some(witness) = find_cycle(rel) {
        return Err(OrderError::Cycle { witness });
    }
    let key = |i: usize| -> (i64, i64, usize) {
        match tie_break {
            TieBreak::Index => (0, 0, i),
            TieBreak::Geometry(keys) => (keys[i][0], keys[i][1], i),
        }
    };
    if let TieBreak::Geometry(keys) = tie_break {
        if keys.len() != n {
            return Err(OrderError::KeyLength {
                expected: n,
                got: keys.len(),
            });
        }
    }

    let succ = rel.successors();
    let mut indeg = rel.in_degrees();
    let mut ready: BinaryHeap<Reverse<(i64, i64, usize)>> =
        (0..n).filter(|&i| indeg[i] == 0).map(|i| Reverse(key(i))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, _, v))) = ready.pop() {
        order.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(Reverse(key(w)));
            }
        }
    }
    debug_assert_eq!(order.len(), n);
    Ok(order)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationRecall {
    pub permutation: Vec<usize>,
    pub recall: f64,
    /// Gold pairs that appear as adjacent pairs of `permutation`.
    pub matched: usize,
}

/// The single permutation whose adjacent pairs recover the most pairs of
/// `rel`, found by exhaustive branch-and-bound search over all orderings.
///
/// Among equally good permutations the lexicographically smallest is returned.
/// An empty relation yields the identity permutation with recall 1.0.
pub fn best_permutation_recall(rel: &Relation) -> Result<PermutationRecall, OrderError> {
    let n = rel.element_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(OrderError::TooLarge {
            n,
            max: BRUTE_FORCE_LIMIT,
        });
    }
    if let Some(witness) = find_cycle(rel) {
        return Err(OrderError::Cycle { witness });
    }
    if rel.is_empty() {
        return Ok(PermutationRecall {
            permutation: (0..n).collect(),
            recall: 1.0,
            matched: 0,
        });
    }

    let gold = rel.to_matrix();
    let ceiling = rel.len().min(n.saturating_sub(1));
    let mut search = Search {
        n,
        gold: &gold,
        ceiling,
        used: vec![false; n],
        prefix: Vec::with_capacity(n),
        best: None,
    };
    search.descend(0);
    let (matched, permutation) = search.best.expect("n >= 1 whenever pairs exist");
    Ok(PermutationRecall {
        permutation,
        recall: matched as f64 / rel.len() as f64,
        matched,
    })
}

struct Search<'a> {
    n: usize,
    gold: &'a [bool],
    ceiling: usize,
    used: Vec<bool>,
    prefix: Vec<usize>,
    best: Option<(usize, Vec<usize>)>,
}

impl Search<'_> {
    fn best_matched(&self) -> Option<usize> {
        self.best.as_ref().map(|b| b.0)
    }

    fn descend(&mut self, matched: usize) {
        if self.best_matched() == Some(self.ceiling) {
            return;
        }
        let placed = self.prefix.len();
        if placed == self.n {
            if self.best_matched().is_none_or(|b| matched > b) {
                self.best = Some((matched, self.prefix.clone()));
            }
            return;
        }
        // each remaining adjacency can add at most one match
        let remaining_edges = if placed == 0 { self.n - 1 } else { self.n - placed };
        if let Some(b) = self.best_matched() {
            if matched + remaining_edges <= b {
                return;
            }
        }
        for next in 0..self.n {
            if self.used[next] {
                continue;
            }
            let gain = match self.prefix.last() {
                Some(&prev) => usize::from(self.gold[prev * self.n + next]),
                None => 0,
            };
            self.used[next] = true;
            self.prefix.push(next);
            self.descend(matched + gain);
            self.prefix.pop();
            self.used[next] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(n: usize, pairs: &[(usize, usize)]) -> Relation {
        Relation::new(n, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn adjacency_of_permutations() {
        assert_eq!(permutation_to_relation(&[2, 0, 1]).unwrap(), rel(3, &[(2, 0), (0, 1)]));
        assert!(permutation_to_relation(&[0]).unwrap().is_empty());
        assert_eq!(
            permutation_to_relation(&[0, 1, 2, 3]).unwrap(),
            rel(4, &[(0, 1), (1, 2), (2, 3)])
        );
    }

    #[test]
    fn invalid_permutations() {
        assert!(matches!(
            permutation_to_relation(&[0, 0, 1]),
            Err(OrderError::InvalidPermutation(_))
        ));
        assert!(matches!(
            permutation_to_relation(&[0, 3, 1]),
            Err(OrderError::InvalidPermutation(_))
        ));
    }

    #[test]
    fn linearization_examples() {
        assert_eq!(
            topological_linearization(&rel(3, &[(0, 1), (0, 2)]), &TieBreak::Index).unwrap(),
            vec![0, 1, 2]
        );
        assert!(matches!(
            topological_linearization(&rel(3, &[(0, 1), (1, 2), (2, 0)]), &TieBreak::Index),
            Err(OrderError::Cycle { .. })
        ));
        assert_eq!(
            topological_linearization(&Relation::empty(3), &TieBreak::Index).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn geometry_tie_break() {
        // element 2 is top-most, element 0 left-most of the rest
        let keys = vec![[50, 10], [50, 400], [10, 900]];
        let order = topological_linearization(&Relation::empty(3), &TieBreak::Geometry(keys)).unwrap();
        assert_eq!(order, vec![2, 0, 1]);
        let bad = TieBreak::Geometry(vec![[0, 0]]);
        assert!(matches!(
            topological_linearization(&Relation::empty(3), &bad),
            Err(OrderError::KeyLength { .. })
        ));
    }

    #[test]
    fn recall_examples() {
        let fork = best_permutation_recall(&rel(3, &[(0, 1), (0, 2)])).unwrap();
        assert_eq!(fork.recall, 0.5);
        let chain = best_permutation_recall(&rel(3, &[(0, 1), (1, 2)])).unwrap();
        assert_eq!(chain.recall, 1.0);
        assert_eq!(chain.permutation, vec![0, 1, 2]);
        let grid = best_permutation_recall(&rel(4, &[(0, 1), (0, 2), (1, 3), (2, 3)])).unwrap();
        assert_eq!(grid.recall, 0.5);
    }

    #[test]
    fn recall_edge_cases() {
        let empty = best_permutation_recall(&Relation::empty(4)).unwrap();
        assert_eq!(empty.recall, 1.0);
        assert_eq!(empty.permutation, vec![0, 1, 2, 3]);
        assert!(matches!(
            best_permutation_recall(&Relation::empty(10)),
            Err(OrderError::TooLarge { n: 10, max: 9 })
        ));
    }
}
