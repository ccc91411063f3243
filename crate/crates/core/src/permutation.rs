use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A bijection on `{0, .., n-1}` stored as its image array: `self.apply(i) = images[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &j in &images {
            if j >= n || seen[j] {
                return domain(format!("{images:?} is not a permutation of 0..{n}"));
            }
            seen[j] = true;
        }
        Ok(Permutation(images))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub(crate) fn from_vec_unchecked(images: Vec<usize>) -> Self {
        debug_assert!(Permutation::new(images.clone()).is_ok());
        Permutation(images)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Permutation(inv)
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return domain("cannot compose permutations of different lengths");
        }
        Ok(Permutation(other.0.iter().map(|&j| self.0[j]).collect()))
    }

    /// Every permutation of `{0, .., n-1}` in lexicographic order.
    pub fn all(n: usize) -> AllPermutations {
        AllPermutations {
            next: Some((0..n).collect()),
        }
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = crate::Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// Lexicographic enumeration of a symmetric group.
pub struct AllPermutations {
    next: Option<Vec<usize>>,
}

impl Iterator for AllPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let n = succ.len();
        if n > 1 {
            let mut i = n - 1;
            while i > 0 && succ[i - 1] >= succ[i] {
                i -= 1;
            }
            if i > 0 {
                let mut j = n - 1;
                while succ[j] <= succ[i - 1] {
                    j -= 1;
                }
                succ.swap(i - 1, j);
                succ[i..].reverse();
                self.next = Some(succ);
            }
        }
        Some(Permutation(current))
    }
}
