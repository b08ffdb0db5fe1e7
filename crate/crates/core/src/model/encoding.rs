//! Canonical payload sizes. Only message content is counted, never headers.

use serde::{Deserialize, Serialize};

/// `⌈log2 x⌉` for `x ≥ 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1, "ceil_log2 of zero");
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// The `log n` used by every schedule formula: `⌈log2 n⌉`, floored at 1 so
/// that tiny systems still get non-empty phases.
pub fn log_n(n: usize) -> u32 {
    ceil_log2(n.max(1) as u64).max(1)
}

/// `⌈√x⌉`.
pub fn ceil_sqrt(x: u64) -> u64 {
    let mut r = (x as f64).sqrt() as u64;
    while r * r > x {
        r -= 1;
    }
    while r * r < x {
        r += 1;
    }
    r
}

/// Bit widths for one system size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    pub n: usize,
    count_bits: u32,
    group_index_bits: u32,
}

impl Encoding {
    pub fn for_n(n: usize) -> Self {
        let groups = ceil_sqrt(n as u64);
        Self {
            n,
            count_bits: ceil_log2(n as u64 + 1),
            group_index_bits: ceil_log2(groups + 1),
        }
    }

    /// A count in `[0, n]`.
    pub fn count(&self) -> u64 {
        self.count_bits as u64
    }

    /// A `(ones, zeros)` pair of counts.
    pub fn pair(&self) -> u64 {
        2 * self.count()
    }

    /// An index into the per-group array.
    pub fn group_index(&self) -> u64 {
        self.group_index_bits as u64
    }

    /// Index width for an array of `len` slots, by the same rule as group indices.
    pub fn index_for_len(len: usize) -> u64 {
        ceil_log2(len as u64 + 1) as u64
    }

    /// A process id in a relay chain.
    pub fn id(&self) -> u64 {
        self.count()
    }

    /// A value from `{⊥, 0, 1}`.
    pub fn optional_bit(&self) -> u64 {
        2
    }
}
