use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ids::ProcessId;
use super::randomness::{mix64, RandomDraw};
use super::snapshot::ProcessSnapshot;

/// How much per-round detail an execution keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// Counts, omissions, corruptions, draws and operative sets.
    #[default]
    Summary,
    /// Additionally every message and every process snapshot.
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperativeSet {
    n: usize,
    words: Vec<u64>,
}

impl OperativeSet {
    pub fn from_flags(flags: impl ExactSizeIterator<Item = bool>) -> Self {
        let n = flags.len();
        let mut words = vec![0u64; n.div_ceil(64)];
        for (i, f) in flags.enumerate() {
            if f {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self { n, words }
    }

    pub fn contains(&self, p: ProcessId) -> bool {
        let i = p.index();
        i < self.n && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset_of(&self, other: &OperativeSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn members(&self) -> impl Iterator<Item = ProcessId> + '_ {
        (0..self.n)
            .filter(|i| self.words[i / 64] >> (i % 64) & 1 == 1)
            .map(ProcessId::from_index)
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmittedMessage {
    pub from: ProcessId,
    pub to: ProcessId,
    pub bits: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub from: ProcessId,
    pub to: ProcessId,
    pub bits: u32,
    pub delivered: bool,
    pub payload: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundDetail {
    pub messages: Vec<MessageRecord>,
    pub snapshots: Vec<ProcessSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub messages_sent: u64,
    pub bits_sent: u64,
    pub omitted: Vec<OmittedMessage>,
    pub new_corruptions: Vec<ProcessId>,
    pub draws: Vec<RandomDraw>,
    /// Processes holding an irrevocable decision at the end of the round.
    pub decided: u32,
    /// Operative flags after the local phase.
    pub operative: OperativeSet,
    /// Running digest over everything recorded so far.
    pub digest: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<RoundDetail>,
}

/// Aggregate state at an epoch/phase boundary or at any round where votes happened.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub round: u32,
    pub scheduled: bool,
    pub operative: u32,
    pub operative_ones: u32,
    pub operative_zeros: u32,
    pub operative_ready: u32,
    pub set_one: u32,
    pub set_zero: u32,
    pub random: u32,
    pub keep: u32,
    pub hit_high: u32,
    pub hit_low: u32,
}

impl CheckpointRecord {
    pub fn votes(&self) -> u32 {
        self.set_one + self.set_zero + self.random + self.keep
    }

    pub fn operative_unanimous(&self) -> bool {
        self.operative_ones == 0 || self.operative_zeros == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub n: usize,
    pub t: usize,
    pub level: TraceLevel,
    pub rounds: Vec<RoundRecord>,
    /// Corrupted processes with the round of corruption, in corruption order.
    pub corrupted: Vec<(ProcessId, u32)>,
    pub checkpoints: Vec<CheckpointRecord>,
}

/// A trace that breaks the execution model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceViolation {
    #[error("{count} corruptions exceed t={t}")]
    TooManyCorruptions { count: usize, t: usize },
    #[error("{process} corrupted twice")]
    DuplicateCorruption { process: ProcessId },
    #[error("round {round}: omitted {from}->{to} with no corrupted endpoint")]
    IllegalOmission {
        round: u32,
        from: ProcessId,
        to: ProcessId,
    },
    #[error("round {round}: {process} regained operative status")]
    OperativeRegained { round: u32, process: ProcessId },
    #[error("round {round}: record is out of sequence")]
    RoundOutOfSequence { round: u32 },
    #[error("round {round}: corruption log disagrees with per-round records")]
    CorruptionLogMismatch { round: u32 },
}

impl ExecutionTrace {
    pub fn new(n: usize, t: usize, level: TraceLevel) -> Self {
        Self {
            n,
            t,
            level,
            rounds: Vec::new(),
            corrupted: Vec::new(),
            checkpoints: Vec::new(),
        }
    }

    /// Number of rounds executed.
    pub fn len(&self) -> u32 {
        self.rounds.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn digest(&self) -> u64 {
        self.rounds.last().map_or(0, |r| r.digest)
    }

    pub fn corruption_round(&self, p: ProcessId) -> Option<u32> {
        self.corrupted.iter().find(|(q, _)| *q == p).map(|(_, r)| *r)
    }

    pub fn is_faulty(&self, p: ProcessId) -> bool {
        self.corruption_round(p).is_some()
    }

    pub fn operative_at(&self, round: u32) -> Option<&OperativeSet> {
        self.rounds.get(round.checked_sub(1)? as usize).map(|r| &r.operative)
    }

    pub fn total_bits(&self) -> u64 {
        self.rounds.iter().map(|r| r.bits_sent).sum()
    }

    pub fn total_messages(&self) -> u64 {
        self.rounds.iter().map(|r| r.messages_sent).sum()
    }

    pub fn total_omitted(&self) -> u64 {
        self.rounds.iter().map(|r| r.omitted.len() as u64).sum()
    }

    /// Replays the model's legality rules over the recorded history.
    pub fn verify(&self) -> Result<(), TraceViolation> {
        if self.corrupted.len() > self.t {
            return Err(TraceViolation::TooManyCorruptions {
                count: self.corrupted.len(),
                t: self.t,
            });
        }
        let mut corrupted_at = vec![None::<u32>; self.n];
        for &(p, r) in &self.corrupted {
            if corrupted_at[p.index()].replace(r).is_some() {
                return Err(TraceViolation::DuplicateCorruption { process: p });
            }
        }
        let mut seen = 0usize;
        let mut prev: Option<&OperativeSet> = None;
        for (i, rec) in self.rounds.iter().enumerate() {
            let round = i as u32 + 1;
            if rec.round != round {
                return Err(TraceViolation::RoundOutOfSequence { round: rec.round });
            }
            for p in &rec.new_corruptions {
                if corrupted_at[p.index()] != Some(round) {
                    return Err(TraceViolation::CorruptionLogMismatch { round });
                }
            }
            seen += rec.new_corruptions.len();
            if seen > self.t {
                return Err(TraceViolation::TooManyCorruptions { count: seen, t: self.t });
            }
            let faulty = |p: ProcessId| corrupted_at[p.index()].is_some_and(|c| c <= round);
            for m in &rec.omitted {
                if !faulty(m.from) && !faulty(m.to) {
                    return Err(TraceViolation::IllegalOmission {
                        round,
                        from: m.from,
                        to: m.to,
                    });
                }
            }
            if let Some(before) = prev {
                if !rec.operative.is_subset_of(before) {
                    let process = rec
                        .operative
                        .members()
                        .find(|p| !before.contains(*p))
                        .expect("non-subset has an extra member");
                    return Err(TraceViolation::OperativeRegained { round, process });
                }
            }
            prev = Some(&rec.operative);
        }
        Ok(())
    }
}

/// Order-sensitive running hash over trace contents.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Digest(u64);

impl Digest {
    pub fn absorb(&mut self, v: u64) {
        self.0 = mix64(self.0 ^ v).rotate_left(7);
    }

    pub fn value(self) -> u64 {
        self.0
    }
}
