use serde::{Deserialize, Serialize};

/// Layout of the stacked decision vector `z = [w; x; y; s]` followed by the
/// homogenizing coordinate `t`. Zero-based; the `(j, k)` pair maps to
/// `l = j * K + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    pub num_candidates: usize,
    pub num_users: usize,
    pub num_subcarriers: usize,
}

impl IndexMap {
    pub fn new(num_candidates: usize, num_users: usize, num_subcarriers: usize) -> Self {
        Self {
            num_candidates,
            num_users,
            num_subcarriers,
        }
    }

    /// `L = J * K`.
    pub fn pairs(&self) -> usize {
        self.num_users * self.num_subcarriers
    }

    pub fn l(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < self.num_users && k < self.num_subcarriers);
        j * self.num_subcarriers + k
    }

    pub fn jk(&self, l: usize) -> (usize, usize) {
        (l / self.num_subcarriers, l % self.num_subcarriers)
    }

    pub fn w(&self, i: usize) -> usize {
        i
    }

    pub fn x(&self, j: usize) -> usize {
        self.num_candidates + j
    }

    pub fn y(&self, l: usize) -> usize {
        self.num_candidates + self.num_users + l
    }

    pub fn s(&self, l: usize) -> usize {
        self.num_candidates + self.num_users + self.pairs() + l
    }

    /// Length of `z`, i.e. `I + J + 2L`.
    pub fn decision_len(&self) -> usize {
        self.num_candidates + self.num_users + 2 * self.pairs()
    }

    pub fn t(&self) -> usize {
        self.decision_len()
    }

    /// Order of the homogenized vector / SDP matrix.
    pub fn dim(&self) -> usize {
        self.decision_len() + 1
    }
}
