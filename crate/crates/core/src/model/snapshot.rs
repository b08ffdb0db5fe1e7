use serde::{Deserialize, Serialize};

use super::ids::Bit;

/// Which rule fixed a candidate at an epoch boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteBranch {
    SetOne,
    SetZero,
    Random,
    Keep,
}

/// A candidate update performed in the current local phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteEvent {
    pub branch: VoteBranch,
    pub hit_decide_high: bool,
    pub hit_decide_low: bool,
}

/// Protocol-agnostic view of one process's state after its local phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessSnapshot {
    pub candidate: Option<Bit>,
    pub operative: bool,
    /// The protocol's "decided" flag (ready to output), distinct from the
    /// irrevocable decision recorded by the engine.
    pub ready: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vote: Option<VoteEvent>,
    pub in_fallback: bool,
}
