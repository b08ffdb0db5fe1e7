//! Intra-epoch subroutines: majority-quorum aggregation of bits inside a
//! group, and gossip of per-group counts over the overlay graph.

mod aggregation;
mod partition;
mod spreading;
mod standalone;

pub use aggregation::{quorum_met, Aggregator};
pub use partition::{tree_depth, GroupPartition, TreeDecomposition};
pub use spreading::{enough_neighbors, spread_receive, spread_send, Links, Spreader};
pub use standalone::{
    run_group_aggregation, run_group_spreading, AggregationOutcome, AggregationProtocol, SpreadOutcome,
    SpreadingProtocol,
};

use serde::{Deserialize, Serialize};

/// The three rounds of one aggregation stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggSub {
    Counts,
    Confirm,
    Merge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpochSlot {
    Aggregate { stage: u32, sub: AggSub },
    Spread { round: u32 },
}

/// Round layout of the epoch loop. Aggregation stages run first (three
/// rounds each), then the spreading rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochLayout {
    /// Communication stages of the deepest group tree.
    pub stages: u32,
    pub spread_rounds: u32,
    pub epochs: u32,
}

impl EpochLayout {
    pub fn per_epoch(&self) -> u32 {
        3 * self.stages + self.spread_rounds
    }

    pub fn total(&self) -> u32 {
        self.epochs * self.per_epoch()
    }

    /// Epoch (0-based) and slot of relative round `rel` in `1..=total()`.
    pub fn slot(&self, rel: u32) -> (u32, EpochSlot) {
        debug_assert!(rel >= 1 && rel <= self.total());
        let per = self.per_epoch();
        let epoch = (rel - 1) / per;
        let offset = (rel - 1) % per;
        let slot = if offset < 3 * self.stages {
            let sub = match offset % 3 {
                0 => AggSub::Counts,
                1 => AggSub::Confirm,
                _ => AggSub::Merge,
            };
            EpochSlot::Aggregate {
                stage: offset / 3 + 2,
                sub,
            }
        } else {
            EpochSlot::Spread {
                round: offset - 3 * self.stages,
            }
        };
        (epoch, slot)
    }

    pub fn starts_epoch(&self, rel: u32) -> bool {
        (rel - 1).is_multiple_of(self.per_epoch())
    }

    pub fn ends_epoch(&self, rel: u32) -> bool {
        rel.is_multiple_of(self.per_epoch())
    }
}
