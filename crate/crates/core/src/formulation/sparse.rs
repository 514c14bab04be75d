use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Sparse symmetric matrix stored as its upper triangle. An entry
/// `(r, c, v)` with `r < c` stands for both `Q[r][c]` and `Q[c][r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix<T> {
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> Default for SymMatrix<T> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<T: Real> SymMatrix<T> {
    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_upper(map: BTreeMap<(usize, usize), T>) -> Self {
        Self {
            entries: map
                .into_iter()
                .filter(|(_, v)| *v != T::zero())
                .map(|((r, c), v)| (r, c, v))
                .collect(),
        }
    }

    /// `z^T Q z`.
    pub fn quad_form(&self, z: &[T]) -> T {
        let two = T::of(2.0);
        self.entries.iter().fold(T::zero(), |acc, &(r, c, v)| {
            if r == c {
                acc + v * z[r] * z[r]
            } else {
                acc + two * v * z[r] * z[c]
            }
        })
    }

    /// `Tr(Q Z)` for a symmetric `Z` given by an accessor.
    pub fn trace_with(&self, z: impl Fn(usize, usize) -> T) -> T {
        let two = T::of(2.0);
        self.entries.iter().fold(T::zero(), |acc, &(r, c, v)| {
            if r == c {
                acc + v * z(r, r)
            } else {
                acc + two * v * z(r, c)
            }
        })
    }

    pub fn to_dense(&self, n: usize) -> nalgebra::DMatrix<T> {
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }
}

/// Accumulates symmetric coefficients. `add_sym(r, c, v)` places `v` at both
/// mirror positions, so `z^T Q z` gains `2 v z_r z_c` for `r != c`.
#[derive(Debug)]
pub struct SymBuilder<T> {
    upper: BTreeMap<(usize, usize), T>,
}

impl<T: Real> Default for SymBuilder<T> {
    fn default() -> Self {
        Self {
            upper: BTreeMap::new(),
        }
    }
}

impl<T: Real> SymBuilder<T> {
    pub fn add_sym(&mut self, r: usize, c: usize, v: T) -> &mut Self {
        let key = if r <= c { (r, c) } else { (c, r) };
        *self.upper.entry(key).or_insert_with(T::zero) += v;
        self
    }

    pub fn build(self) -> SymMatrix<T> {
        SymMatrix::from_upper(self.upper)
    }
}

/// Sparse vector as sorted `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVec<T> {
    entries: Vec<(usize, T)>,
}

impl<T: Real> Default for SparseVec<T> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<T: Real> SparseVec<T> {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, T)>) -> Self {
        let mut map = BTreeMap::new();
        for (i, v) in pairs {
            *map.entry(i).or_insert_with(T::zero) += v;
        }
        Self {
            entries: map.into_iter().filter(|(_, v)| *v != T::zero()).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn dot(&self, z: &[T]) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |acc, &(i, v)| acc + v * z[i])
    }
}
