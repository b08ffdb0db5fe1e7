use serde::{Deserialize, Serialize};

/// What a contiguous block of rounds is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Epoch,
    Phase,
    Flood,
    Safety,
    Final,
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    pub kind: SegmentKind,
    /// First round, inclusive.
    pub start: u32,
    /// Last round, inclusive.
    pub end: u32,
}

impl Segment {
    pub fn new(label: impl Into<String>, kind: SegmentKind, start: u32, len: u32) -> Self {
        assert!(len >= 1, "empty segment");
        Self {
            label: label.into(),
            kind,
            start,
            end: start + len - 1,
        }
    }

    pub fn contains(&self, round: u32) -> bool {
        (self.start..=self.end).contains(&round)
    }
}

/// The fixed round layout of a protocol, known to everyone in advance
/// (the adversary included).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub segments: Vec<Segment>,
    /// Rounds whose post-local state closes an epoch or phase.
    pub checkpoints: Vec<u32>,
    /// Rounds at which candidate votes (and hence coin flips) may happen.
    pub vote_rounds: Vec<u32>,
    /// Termination round when no fallback is needed.
    pub fault_free_rounds: u32,
    /// Hard cap; reaching it with undecided non-faulty processes is a liveness failure.
    pub max_rounds: u32,
}

impl Schedule {
    pub fn segment_of(&self, round: u32) -> Option<&Segment> {
        self.segments.iter().find(|s| s.contains(round))
    }
}
