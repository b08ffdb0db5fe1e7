//! Lockstep execution engine, adversary interface and accounting.

mod adversary;
mod encoding;
mod engine;
mod ids;
mod message;
mod metrics;
mod randomness;
mod schedule;
mod snapshot;
mod trace;

pub use adversary::{
    apply_adversary_action, AdversaryAction, AdversaryObservation, AdversaryStrategy, CorruptionSet, Hook, NodeView,
    Omission,
};
pub use encoding::{ceil_log2, ceil_sqrt, log_n, Encoding};
pub use engine::{
    run_collect, run_execution, DecisionRecord, DecisionVector, Execution, PayloadOf, Process, Protocol, RunInfo, StepCtx,
    SystemConfig,
};
pub use ids::{Bit, ProcessId};
pub use message::{Envelope, Payload};
pub use metrics::{Metrics, SegmentMetrics};
pub use randomness::{derive_seed, mix64, ProcessRng, RandomDraw, RandomnessLedger};
pub use schedule::{Schedule, Segment, SegmentKind};
pub use snapshot::{ProcessSnapshot, VoteBranch, VoteEvent};
pub use trace::{
    CheckpointRecord, ExecutionTrace, MessageRecord, OmittedMessage, OperativeSet, RoundDetail, RoundRecord,
    TraceLevel, TraceViolation,
};
