use super::{OrderViolation, Relation, ViolationKind};

/// Finds a cycle by depth-first search, scanning start nodes and successors in
/// ascending order. The witness repeats its first node at the end.
pub fn find_cycle(rel: &Relation) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }

    let n = rel.element_count();
    let succ = rel.successors();
    let mut mark = vec![Mark::White; n];

    for root in 0..n {
        if mark[root] != Mark::White {
            continue;
        }
        // (node, next successor position)
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Grey;
        while let Some(top) = stack.last_mut() {
            let v = top.0;
            if let Some(&w) = succ[v].get(top.1) {
                top.1 += 1;
                match mark[w] {
                    Mark::White => {
                        mark[w] = Mark::Grey;
                        stack.push((w, 0));
                    }
                    Mark::Grey => {
                        let start = stack.iter().position(|&(u, _)| u == w).expect("grey node on stack");
                        let mut cycle: Vec<usize> = stack[start..].iter().map(|&(u, _)| u).collect();
                        cycle.push(w);
                        return Some(cycle);
                    }
                    Mark::Black => {}
                }
            } else {
                mark[v] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}

/// Whether `rel` is a directed acyclic relation; the error carries a cycle witness.
pub fn is_acyclic(rel: &Relation) -> Result<(), OrderViolation> {
    match find_cycle(rel) {
        None => Ok(()),
        Some(witness) => Err(OrderViolation {
            kind: ViolationKind::Cycle,
            witness,
        }),
    }
}

/// Irreflexive, antisymmetric and transitive. Checks run in that order and
/// the first violation in lexicographic pair order is reported.
pub fn is_strict_partial_order(rel: &Relation) -> Result<(), OrderViolation> {
    for (i, j) in rel.pairs() {
        if i == j {
            return Err(OrderViolation {
                kind: ViolationKind::ReflexivePair,
                witness: vec![i],
            });
        }
    }
    for (i, j) in rel.pairs() {
        if i < j && rel.contains(j, i) {
            return Err(OrderViolation {
                kind: ViolationKind::AntisymmetryPair,
                witness: vec![i, j],
            });
        }
    }
    let succ = rel.successors();
    for (i, j) in rel.pairs() {
        for &k in &succ[j] {
            if !rel.contains(i, k) {
                return Err(OrderViolation {
                    kind: ViolationKind::MissingTransitivePair,
                    witness: vec![i, j, k],
                });
            }
        }
    }
    Ok(())
}

/// A strict partial order in which every two distinct elements are comparable.
pub fn is_strict_total_order(rel: &Relation) -> Result<(), OrderViolation> {
    is_strict_partial_order(rel)?;
    let n = rel.element_count();
    for i in 0..n {
        for j in i + 1..n {
            if !rel.contains(i, j) && !rel.contains(j, i) {
                return Err(OrderViolation {
                    kind: ViolationKind::IncomparablePair,
                    witness: vec![i, j],
                });
            }
        }
    }
    Ok(())
}
