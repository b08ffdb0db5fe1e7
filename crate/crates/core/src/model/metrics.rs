use serde::{Deserialize, Serialize};

use super::randomness::RandomnessLedger;
use super::schedule::{Schedule, SegmentKind};
use super::trace::ExecutionTrace;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMetrics {
    pub label: String,
    pub kind: SegmentKind,
    pub start: u32,
    pub end: u32,
    pub messages: u64,
    pub bits: u64,
    pub random_accesses: u64,
    pub random_bits: u64,
}

/// Complexity tallies of one execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    /// Termination round of the last non-faulty process.
    pub rounds: u32,
    pub messages: u64,
    /// Payload bits of every sent message, delivered or not.
    pub comm_bits: u64,
    pub random_accesses: u64,
    pub random_bits: u64,
    /// `(round, accesses)` for rounds with at least one access.
    pub random_by_round: Vec<(u32, u32)>,
    pub omitted_messages: u64,
    pub corruptions: usize,
    pub segments: Vec<SegmentMetrics>,
    pub fallback_triggered: bool,
}

impl Metrics {
    pub fn from_trace(trace: &ExecutionTrace, ledger: &RandomnessLedger, schedule: &Schedule) -> Self {
        let mut segments: Vec<SegmentMetrics> = schedule
            .segments
            .iter()
            .filter(|s| s.start <= trace.len())
            .map(|s| SegmentMetrics {
                label: s.label.clone(),
                kind: s.kind,
                start: s.start,
                end: s.end,
                messages: 0,
                bits: 0,
                random_accesses: 0,
                random_bits: 0,
            })
            .collect();
        let mut seg = 0;
        for r in &trace.rounds {
            while seg < segments.len() && segments[seg].end < r.round {
                seg += 1;
            }
            if let Some(s) = segments.get_mut(seg).filter(|s| s.start <= r.round) {
                s.messages += r.messages_sent;
                s.bits += r.bits_sent;
                s.random_accesses += r.draws.len() as u64;
                s.random_bits += r.draws.iter().map(|d| d.width as u64).sum::<u64>();
            }
        }
        let fallback_triggered = segments
            .iter()
            .any(|s| s.kind == SegmentKind::Fallback && s.messages > 0);
        Metrics {
            rounds: trace.len(),
            messages: trace.total_messages(),
            comm_bits: trace.total_bits(),
            random_accesses: ledger.total_accesses,
            random_bits: ledger.total_bits,
            random_by_round: ledger
                .per_round_accesses
                .iter()
                .enumerate()
                .filter(|(_, r)| **r > 0)
                .map(|(i, r)| (i as u32 + 1, *r))
                .collect(),
            omitted_messages: trace.total_omitted(),
            corruptions: trace.corrupted.len(),
            segments,
            fallback_triggered,
        }
    }
}
