use std::collections::VecDeque;

use super::Relation;

/// Above this many elements the closure switches from dense Warshall to
/// per-source breadth-first search.
pub const WARSHALL_LIMIT: usize = 2048;

/// Smallest transitive relation containing `rel`. Defined for any relation,
/// cyclic or not.
pub fn transitive_closure(rel: &Relation) -> Relation {
    if rel.element_count() <= WARSHALL_LIMIT {
        transitive_closure_warshall(rel)
    } else {
        transitive_closure_bfs(rel)
    }
}

/// Warshall's algorithm over packed bit rows.
pub fn transitive_closure_warshall(rel: &Relation) -> Relation {
    let n = rel.element_count();
    let words = n.div_ceil(64);
    let mut rows = vec![0u64; n * words];
    for (i, j) in rel.pairs() {
        rows[i * words + j / 64] |= 1 << (j % 64);
    }
    for k in 0..n {
        let (kw, kb) = (k / 64, 1u64 << (k % 64));
        let row_k: Vec<u64> = rows[k * words..(k + 1) * words].to_vec();
        for i in 0..n {
            if rows[i * words + kw] & kb != 0 {
                let row_i = &mut rows[i * words..(i + 1) * words];
                for (dst, src) in row_i.iter_mut().zip(&row_k) {
                    *dst |= *src;
                }
            }
        }
    }
    let mut out = Relation::empty(n);
    for i in 0..n {
        for w in 0..words {
            let mut bits = rows[i * words + w];
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                out.insert(i, w * 64 + b).expect("index within range");
            }
        }
    }
    out
}

/// Reachability by breadth-first search from every source. Memory is
/// proportional to the closure size rather than `n²`.
pub fn transitive_closure_bfs(rel: &Relation) -> Relation {
    let n = rel.element_count();
    let succ = rel.successors();
    let mut out = Relation::empty(n);
    let mut seen = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        queue.clear();
        for &j in &succ[src] {
            if seen[j] != src {
                seen[j] = src;
                queue.push_back(j);
            }
        }
        while let Some(v) = queue.pop_front() {
            out.insert(src, v).expect("index within range");
            for &w in &succ[v] {
                if seen[w] != src {
                    seen[w] = src;
                    queue.push_back(w);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(n: usize, pairs: &[(usize, usize)]) -> Relation {
        Relation::new(n, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn chain_gains_shortcut() {
        let closed = transitive_closure(&rel(3, &[(0, 1), (1, 2)]));
        assert_eq!(closed, rel(3, &[(0, 1), (1, 2), (0, 2)]));
    }

    #[test]
    fn already_transitive_is_unchanged() {
        let r = rel(3, &[(0, 1), (0, 2)]);
        assert_eq!(transitive_closure(&r), r);
    }

    #[test]
    fn cycle_closes_to_full_block() {
        let closed = transitive_closure(&rel(3, &[(0, 1), (1, 2), (2, 0)]));
        assert_eq!(closed.len(), 9);
    }

    #[test]
    fn bfs_matches_warshall_across_word_boundary() {
        let n = 130;
        let pairs: Vec<_> = (0..n - 1).filter(|i| i % 7 != 3).map(|i| (i, i + 1)).collect();
        let r = rel(n, &pairs);
        assert_eq!(transitive_closure_bfs(&r), transitive_closure_warshall(&r));
    }
}
