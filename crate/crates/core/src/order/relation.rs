use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::OrderError;

/// A binary relation over the elements `0..element_count`.
///
/// Pairs are kept in a sorted set, so iteration is always lexicographic and
/// serialization is stable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Relation {
    element_count: usize,
    pairs: BTreeSet<(usize, usize)>,
}

impl Relation {
    pub fn empty(element_count: usize) -> Self {
        Self {
            element_count,
            pairs: BTreeSet::new(),
        }
    }

    /// Builds a relation, rejecting any pair with an index outside `0..element_count`.
    /// Duplicate pairs collapse.
    pub fn new<I>(element_count: usize, pairs: I) -> Result<Self, OrderError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut rel = Self::empty(element_count);
        for (i, j) in pairs {
            rel.insert(i, j)?;
        }
        Ok(rel)
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i, j))
    }

    /// Inserts a pair; returns whether it was new.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool, OrderError> {
        let n = self.element_count;
        if i >= n || j >= n {
            return Err(OrderError::IndexOutOfRange {
                pair: (i, j),
                element_count: n,
            });
        }
        Ok(self.pairs.insert((i, j)))
    }

    pub fn remove(&mut self, i: usize, j: usize) -> bool {
        self.pairs.remove(&(i, j))
    }

    /// Pairs in lexicographic order.
    pub fn pairs(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn pair_set(&self) -> &BTreeSet<(usize, usize)> {
        &self.pairs
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    /// Sorted successor lists, one per element.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.element_count];
        for &(i, j) in &self.pairs {
            out[i].push(j);
        }
        out
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.element_count];
        for &(_, j) in &self.pairs {
            deg[j] += 1;
        }
        deg
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.element_count];
        for &(i, _) in &self.pairs {
            deg[i] += 1;
        }
        deg
    }

    /// Relabels every element `i` as `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Relation, OrderError> {
        if perm.len() != self.element_count {
            return Err(OrderError::InvalidPermutation(format!(
                "expected {} entries, got {}",
                self.element_count,
                perm.len()
            )));
        }
        Relation::new(
            self.element_count,
            self.pairs.iter().map(|&(i, j)| (perm[i], perm[j])),
        )
    }

    /// Dense row-major boolean adjacency matrix.
    pub fn to_matrix(&self) -> Vec<bool> {
        let n = self.element_count;
        let mut m = vec![false; n * n];
        for &(i, j) in &self.pairs {
            m[i * n + j] = true;
        }
        m
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} {{", self.element_count)?;
        for (k, (i, j)) in self.pairs().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({i},{j})")?;
        }
        write!(f, "}}")
    }
}

#[derive(Serialize, Deserialize)]
struct RelationRecord {
    n: usize,
    pairs: Vec<[usize; 2]>,
}

impl Serialize for Relation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RelationRecord {
            n: self.element_count,
            pairs: self.pairs().map(|(i, j)| [i, j]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Relation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rec = RelationRecord::deserialize(deserializer)?;
        Relation::new(rec.n, rec.pairs.into_iter().map(|[i, j]| (i, j)))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        let err = Relation::new(2, [(0, 2)]).unwrap_err();
        assert!(matches!(err, OrderError::IndexOutOfRange { .. }));
    }

    #[test]
    fn duplicates_collapse() {
        let rel = Relation::new(3, [(0, 1), (0, 1), (1, 2)]).unwrap();
        assert_eq!(rel.len(), 2);
    }

    #[test]
    fn json_pairs_sorted_on_write() {
        let rel = Relation::new(3, [(1, 2), (0, 2), (0, 1)]).unwrap();
        let s = serde_json::to_string(&rel).unwrap();
        assert_eq!(s, r#"{"n":3,"pairs":[[0,1],[0,2],[1,2]]}"#);
        let back: Relation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rel);
    }

    #[test]
    fn json_rejects_bad_index() {
        assert!(serde_json::from_str::<Relation>(r#"{"n":2,"pairs":[[0,5]]}"#).is_err());
    }
}
