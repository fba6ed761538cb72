//! Countable index sets and their canonical enumerations.
//!
//! Matrices are indexed either by `0, 1, 2, …` (one-sided) or by all of ℤ
//! (two-sided). Truncations always take the first `N` indices of the
//! enumeration; for the two-sided case the spiral `0, 1, −1, 2, −2, …` is
//! used so every truncation is a centered window and truncation spectral
//! radii are monotone in `N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of countable index set a matrix is defined over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexSet {
    /// Indices `0, 1, 2, …`
    #[serde(rename = "n")]
    OneSided,
    /// Indices `…, −1, 0, 1, …`, enumerated by the spiral `0, 1, −1, 2, −2, …`
    #[serde(rename = "z")]
    TwoSided,
}

impl IndexSet {
    /// The `pos`-th index of the enumeration.
    pub fn enumerate(&self, pos: usize) -> i64 {
        match self {
            IndexSet::OneSided => pos as i64,
            IndexSet::TwoSided => {
                // 0, 1, -1, 2, -2, ...: position 2k-1 -> k, position 2k -> -k
                let p = pos as i64;
                if p % 2 == 1 {
                    (p + 1) / 2
                } else {
                    -(p / 2)
                }
            }
        }
    }

    /// Position of `index` in the enumeration, if it belongs to the set.
    pub fn position(&self, index: i64) -> Option<usize> {
        match self {
            IndexSet::OneSided => {
                if index >= 0 {
                    Some(index as usize)
                } else {
                    None
                }
            }
            IndexSet::TwoSided => {
                if index > 0 {
                    Some((2 * index - 1) as usize)
                } else {
                    Some((-2 * index) as usize)
                }
            }
        }
    }

    /// Whether `index` is a member of the set.
    pub fn contains(&self, index: i64) -> bool {
        match self {
            IndexSet::OneSided => index >= 0,
            IndexSet::TwoSided => true,
        }
    }

    pub fn check(&self, index: i64) -> Result<()> {
        if self.contains(index) {
            Ok(())
        } else {
            Err(Error::IndexOutOfDomain {
                index,
                kind: self.name(),
            })
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            IndexSet::OneSided => "one-sided",
            IndexSet::TwoSided => "two-sided",
        }
    }

    /// The first `n` indices in enumeration order.
    pub fn window(&self, n: usize) -> Vec<i64> {
        (0..n).map(|p| self.enumerate(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spiral_prefix() {
        let e = IndexSet::TwoSided;
        let first: Vec<i64> = (0..7).map(|p| e.enumerate(p)).collect();
        assert_eq!(first, vec![0, 1, -1, 2, -2, 3, -3]);
    }

    #[test]
    fn spiral_symmetry() {
        let e = IndexSet::TwoSided;
        for k in 1..100i64 {
            assert_eq!(e.enumerate((2 * k - 1) as usize), k);
            assert_eq!(e.enumerate((2 * k) as usize), -k);
        }
    }

    #[test]
    fn one_sided_rejects_negative() {
        assert!(IndexSet::OneSided.check(-1).is_err());
        assert!(IndexSet::OneSided.check(0).is_ok());
    }

    proptest! {
        #[test]
        fn enumeration_is_bijective(pos in 0usize..100_000) {
            for set in [IndexSet::OneSided, IndexSet::TwoSided] {
                let idx = set.enumerate(pos);
                prop_assert_eq!(set.position(idx), Some(pos));
            }
        }
    }
}
