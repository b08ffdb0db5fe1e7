//! Message payloads shared by every protocol in the crate.

use serde::{Deserialize, Serialize};

use crate::model::{Bit, Encoding, Payload, ProcessId};

/// A `(ones, zeros)` pair. `provenance` marks contributing group positions;
/// it is instrumentation only and is not part of the encoded size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tally {
    pub ones: u32,
    pub zeros: u32,
    pub provenance: u128,
}

impl Tally {
    pub fn single(bit: Bit, position: usize) -> Self {
        Self {
            ones: (bit == Bit::One) as u32,
            zeros: (bit == Bit::Zero) as u32,
            provenance: 1u128 << position,
        }
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            ones: self.ones + other.ones,
            zeros: self.zeros + other.zeros,
            provenance: self.provenance | other.provenance,
        }
    }

    pub fn total(&self) -> u32 {
        self.ones + self.zeros
    }

    pub fn counts(&self) -> (u32, u32) {
        (self.ones, self.zeros)
    }
}

/// The relay set a transmitter returns to a source: one optional pair per child bag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergedCounts {
    pub children: [Option<Tally>; 2],
}

/// One non-empty slot of the per-group array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PackEntry {
    pub group: u16,
    pub tally: Tally,
}

/// A value carried along a relay chain of distinct ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainValue {
    pub value: Bit,
    pub chain: Vec<ProcessId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Msg {
    /// Aggregation: a source's child-bag counts.
    Counts(Tally),
    /// Aggregation: a transmitter heard the source.
    Confirm,
    /// Aggregation: a transmitter's merged counts for the source's bag.
    Merged(MergedCounts),
    /// Spreading: array entries not yet exchanged over this link (may be empty).
    Spread(Vec<PackEntry>),
    /// Final dissemination of a decided value.
    Decision(Bit),
    /// Deterministic fallback relays.
    Chains(Vec<ChainValue>),
    /// Super-process outcome gossip; `None` is ⊥.
    Flood(Option<Bit>),
    /// Safety-rule vote.
    Vote(Bit),
}

impl Payload for Msg {
    fn bit_size(&self, enc: &Encoding) -> u64 {
        match self {
            Msg::Counts(_) => enc.pair(),
            Msg::Confirm | Msg::Decision(_) | Msg::Vote(_) => 1,
            Msg::Merged(m) => {
                let slot = Encoding::index_for_len(2) + enc.pair();
                m.children.iter().flatten().count() as u64 * slot
            }
            Msg::Spread(entries) => entries.len() as u64 * (enc.group_index() + enc.pair()),
            Msg::Chains(items) => items.iter().map(|c| 1 + c.chain.len() as u64 * enc.id()).sum(),
            Msg::Flood(_) => enc.optional_bit(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_sizes() {
        let enc = Encoding::for_n(256);
        let t = Tally::single(Bit::One, 0);
        assert_eq!(Msg::Counts(t).bit_size(&enc), 18);
        assert_eq!(Msg::Confirm.bit_size(&enc), 1);
        let merged = MergedCounts { children: [Some(t), None] };
        assert_eq!(Msg::Merged(merged).bit_size(&enc), 20);
        assert_eq!(Msg::Spread(vec![]).bit_size(&enc), 0);
        let e = PackEntry { group: 3, tally: t };
        assert_eq!(Msg::Spread(vec![e, e]).bit_size(&enc), 2 * (5 + 18));
        let c = ChainValue {
            value: Bit::Zero,
            chain: vec![ProcessId::new(1), ProcessId::new(2)],
        };
        assert_eq!(Msg::Chains(vec![c]).bit_size(&enc), 1 + 2 * 9);
        assert_eq!(Msg::Flood(None).bit_size(&enc), 2);
    }
}
