use std::fmt::Debug;

use serde::Serialize;

use super::encoding::Encoding;
use super::ids::ProcessId;

/// Message content. Implementors define their canonical encoded size.
pub trait Payload: Clone + Debug + Send + Sync + 'static {
    fn bit_size(&self, enc: &Encoding) -> u64;
}

/// A message in flight. `from != to` is enforced when sending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Envelope<P> {
    pub from: ProcessId,
    pub to: ProcessId,
    pub payload: P,
}
