//! Candidate role schemes: fixed, pure assignments of one role id per token
//! position. A fitted approximation learns *which* of these hypotheses the
//! model converged to; the schemes themselves never look at token content.

use serde::{Deserialize, Serialize};

use crate::{AnalysisError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoleScheme {
    /// Role = position from the left.
    LeftToRight,
    /// Role = position from the right.
    RightToLeft,
    /// Role = the (from-left, from-right) pair, enumerated densely.
    Bidirectional,
    /// One role for every position: order-free control.
    BagOfWords,
    /// Role = leaf path in a balanced binary tree over the positions.
    TreePosition,
}

impl RoleScheme {
    pub const ALL: [RoleScheme; 5] = [
        RoleScheme::LeftToRight,
        RoleScheme::RightToLeft,
        RoleScheme::Bidirectional,
        RoleScheme::BagOfWords,
        RoleScheme::TreePosition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleScheme::LeftToRight => "left-to-right",
            RoleScheme::RightToLeft => "right-to-left",
            RoleScheme::Bidirectional => "bidirectional",
            RoleScheme::BagOfWords => "bag-of-words",
            RoleScheme::TreePosition => "tree-position",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AnalysisError::Invalid(format!("unknown role scheme '{s}'")))
    }

    /// Size of the role inventory for sequences up to `max_len` tokens.
    pub fn n_roles(self, max_len: usize) -> usize {
        match self {
            RoleScheme::LeftToRight | RoleScheme::RightToLeft => max_len,
            RoleScheme::Bidirectional => max_len * (max_len + 1) / 2,
            RoleScheme::BagOfWords => 1,
            // Heap indices 1..2^(d+1)-1 of a binary tree deep enough to
            // give every position of a max_len sequence its own leaf.
            RoleScheme::TreePosition => (2 << tree_depth(max_len)) - 1,
        }
    }

    /// The role id of each position in a length-`len` sequence. Pure and
    /// total over 1..=max_len; every id is below [`RoleScheme::n_roles`].
    pub fn role_ids(self, len: usize, max_len: usize) -> Result<Vec<usize>> {
        if len == 0 || len > max_len {
            return Err(AnalysisError::BadLength { len, max_len });
        }
        Ok(match self {
            RoleScheme::LeftToRight => (0..len).collect(),
            RoleScheme::RightToLeft => (0..len).map(|i| len - 1 - i).collect(),
            // Dense triangular enumeration of (l, r) with l + r ≤ max_len-1:
            // pairs are grouped by length, shorter sequences first.
            RoleScheme::Bidirectional => (0..len)
                .map(|i| {
                    let (l, r) = (i, len - 1 - i);
                    (l + r) * (l + r + 1) / 2 + l
                })
                .collect(),
            RoleScheme::BagOfWords => vec![0; len],
            RoleScheme::TreePosition => {
                let mut ids = vec![0usize; len];
                tree_assign(0, len, 1, &mut ids);
                ids
            }
        })
    }
}

impl std::fmt::Display for RoleScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Smallest depth whose complete binary tree has at least `max_len` leaves.
fn tree_depth(max_len: usize) -> usize {
    let mut d = 0;
    while (1usize << d) < max_len {
        d += 1;
    }
    d
}

/// Recursively halves `[lo, lo+n)` (left half gets the extra position) and
/// records each position's heap index minus one. `node` is 1 at the root,
/// 2k / 2k+1 for children — so the id encodes the root-to-leaf path.
fn tree_assign(lo: usize, n: usize, node: usize, ids: &mut [usize]) {
    if n == 1 {
        ids[lo] = node - 1;
        return;
    }
    let left = n.div_ceil(2);
    tree_assign(lo, left, 2 * node, ids);
    tree_assign(lo + left, n - left, 2 * node + 1, ids);
}
