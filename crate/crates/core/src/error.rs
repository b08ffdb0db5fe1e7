use thiserror::Error;

use crate::model::ProcessId;

/// Rejected configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("system must have at least one process")]
    EmptySystem,
    #[error("fault budget t={t} must be below n={n}")]
    BudgetTooLarge { n: usize, t: usize },
    #[error("{protocol} needs {bound}; got n={n}, t={t}")]
    FaultBound {
        protocol: &'static str,
        bound: &'static str,
        n: usize,
        t: usize,
    },
    #[error("expected {expected} inputs, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("crash schedule corrupts {scheduled} processes but t={t}")]
    ScheduleExceedsBudget { scheduled: usize, t: usize },
}

impl ConfigError {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

/// An adversary action the model forbids.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryViolation {
    #[error("round {round}: corrupting {attempted} processes exceeds t={budget}")]
    BudgetExceeded {
        round: u32,
        attempted: usize,
        budget: usize,
    },
    #[error("round {round}: omission {from}->{to} touches no corrupted process")]
    IllegalOmission {
        round: u32,
        from: ProcessId,
        to: ProcessId,
    },
    #[error("round {round}: rule targets {process}, which is not corrupted")]
    UncorruptedTarget { round: u32, process: ProcessId },
    #[error("round {round}: no pending message with index {index}")]
    UnknownMessage { round: u32, index: usize },
    #[error("round {round}: process id {id} out of range")]
    UnknownProcess { round: u32, id: u32 },
}

/// A protocol state machine refused to continue.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolFault {
    #[error("{process} in round {round}: vote counts sum to zero")]
    DegenerateInput { process: ProcessId, round: u32 },
    #[error("{from} addressed a message to invalid recipient {to}")]
    InvalidRecipient { from: ProcessId, to: u32 },
}

/// Why an execution did not complete.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("adversary violation: {0}")]
    Adversary(#[from] AdversaryViolation),
    #[error("protocol fault: {0}")]
    Protocol(#[from] ProtocolFault),
    #[error("liveness failure: {} non-faulty processes undecided after round {round}", undecided.len())]
    Liveness {
        round: u32,
        undecided: Vec<ProcessId>,
    },
}

/// A checker could not run as requested.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("exact enumeration needs {needed} cases, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
