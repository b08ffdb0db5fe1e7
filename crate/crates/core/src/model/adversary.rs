use std::collections::HashSet;
use std::ops::Range;

use super::engine::{DecisionRecord, RunInfo};
use super::ids::{Bit, ProcessId};
use super::message::Envelope;
use super::randomness::RandomDraw;
use super::schedule::Schedule;
use super::snapshot::ProcessSnapshot;
use super::trace::ExecutionTrace;
use crate::error::AdversaryViolation;

/// The two points per round where the adversary acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hook {
    /// After every local phase, before anything is sent.
    AfterLocal,
    /// While messages are in transit.
    Delivery,
}

/// A set of messages to drop. Each must touch a corrupted endpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Omission {
    /// Index into the pending message list of this round.
    Message(usize),
    AllFrom(ProcessId),
    AllTo(ProcessId),
    Link { from: ProcessId, to: ProcessId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdversaryAction {
    pub corrupt: Vec<ProcessId>,
    pub omit: Vec<Omission>,
}

impl AdversaryAction {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.corrupt.is_empty() && self.omit.is_empty()
    }
}

/// Corrupted processes and when they were taken over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorruptionSet {
    round_of: Vec<Option<u32>>,
    order: Vec<ProcessId>,
}

impl CorruptionSet {
    pub fn new(n: usize) -> Self {
        Self {
            round_of: vec![None; n],
            order: Vec::new(),
        }
    }

    pub fn contains(&self, p: ProcessId) -> bool {
        self.round_of.get(p.index()).copied().flatten().is_some()
    }

    pub fn round_of(&self, p: ProcessId) -> Option<u32> {
        self.round_of.get(p.index()).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.order.iter().copied()
    }

    fn insert(&mut self, p: ProcessId, round: u32) -> bool {
        let slot = &mut self.round_of[p.index()];
        if slot.is_some() {
            return false;
        }
        *slot = Some(round);
        self.order.push(p);
        true
    }
}

/// Engine-side view of a process offered to the adversary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeView {
    pub snapshot: ProcessSnapshot,
    pub decision: Option<DecisionRecord>,
    pub halted: bool,
}

/// Everything the adversary may see: all states, histories, this round's
/// coin flips and pending message contents. Future coin flips do not exist yet.
#[derive(Clone, Copy, Debug)]
pub struct AdversaryObservation<'a, P> {
    pub round: u32,
    pub hook: Hook,
    pub n: usize,
    pub t: usize,
    pub schedule: &'a Schedule,
    pub inputs: &'a [Bit],
    pub corrupted: &'a CorruptionSet,
    /// Sorted by sender.
    pub pending: &'a [Envelope<P>],
    pub draws: &'a [RandomDraw],
    pub states: &'a [NodeView],
    pub trace: &'a ExecutionTrace,
}

impl<P> AdversaryObservation<'_, P> {
    /// Indices of pending messages sent by `p`.
    pub fn pending_from(&self, p: ProcessId) -> Range<usize> {
        let lo = self.pending.partition_point(|e| e.from < p);
        let hi = self.pending.partition_point(|e| e.from <= p);
        lo..hi
    }

    pub fn budget_left(&self) -> usize {
        self.t - self.corrupted.len()
    }
}

/// A pluggable adversary. It is deterministic given its construction
/// parameters and the observations it receives.
pub trait AdversaryStrategy<P>: Send {
    fn name(&self) -> String;

    fn init(&mut self, _info: &RunInfo<'_>) {}

    fn after_local(&mut self, obs: &AdversaryObservation<'_, P>) -> AdversaryAction;

    fn during_delivery(&mut self, _obs: &AdversaryObservation<'_, P>) -> AdversaryAction {
        AdversaryAction::none()
    }
}

/// Accumulates validated omissions for one round.
#[derive(Debug, Default)]
pub(crate) struct OmissionFilter {
    round: u32,
    by_index: Vec<bool>,
    from_stamp: Vec<u32>,
    to_stamp: Vec<u32>,
    links: HashSet<(ProcessId, ProcessId)>,
}

impl OmissionFilter {
    pub fn new(n: usize) -> Self {
        Self {
            round: 0,
            by_index: Vec::new(),
            from_stamp: vec![0; n],
            to_stamp: vec![0; n],
            links: HashSet::new(),
        }
    }

    pub fn reset(&mut self, round: u32, pending: usize) {
        self.round = round;
        self.by_index.clear();
        self.by_index.resize(pending, false);
        self.links.clear();
    }

    fn check_id(&self, p: ProcessId) -> Result<(), AdversaryViolation> {
        if p.index() >= self.from_stamp.len() {
            return Err(AdversaryViolation::UnknownProcess {
                round: self.round,
                id: p.get(),
            });
        }
        Ok(())
    }

    /// Validates `action` and folds it in. Corruptions take effect before
    /// omissions are checked, so one action may corrupt and silence.
    pub fn apply<P>(
        &mut self,
        action: &AdversaryAction,
        pending: &[Envelope<P>],
        corrupted: &mut CorruptionSet,
        t: usize,
        newly: &mut Vec<ProcessId>,
    ) -> Result<(), AdversaryViolation> {
        let round = self.round;
        for &p in &action.corrupt {
            self.check_id(p)?;
        }
        let fresh: HashSet<ProcessId> = action
            .corrupt
            .iter()
            .copied()
            .filter(|p| !corrupted.contains(*p))
            .collect();
        if corrupted.len() + fresh.len() > t {
            return Err(AdversaryViolation::BudgetExceeded {
                round,
                attempted: corrupted.len() + fresh.len(),
                budget: t,
            });
        }
        for &p in &action.corrupt {
            if corrupted.insert(p, round) {
                newly.push(p);
            }
        }
        let require = |p: ProcessId| {
            if corrupted.contains(p) {
                Ok(())
            } else {
                Err(AdversaryViolation::UncorruptedTarget { round, process: p })
            }
        };
        for omission in &action.omit {
            match *omission {
                Omission::Message(i) => {
                    let env = pending
                        .get(i)
                        .ok_or(AdversaryViolation::UnknownMessage { round, index: i })?;
                    if !corrupted.contains(env.from) && !corrupted.contains(env.to) {
                        return Err(AdversaryViolation::IllegalOmission {
                            round,
                            from: env.from,
                            to: env.to,
                        });
                    }
                    self.by_index[i] = true;
                }
                Omission::AllFrom(p) => {
                    self.check_id(p)?;
                    require(p)?;
                    self.from_stamp[p.index()] = round;
                }
                Omission::AllTo(p) => {
                    self.check_id(p)?;
                    require(p)?;
                    self.to_stamp[p.index()] = round;
                }
                Omission::Link { from, to } => {
                    self.check_id(from)?;
                    self.check_id(to)?;
                    if !corrupted.contains(from) && !corrupted.contains(to) {
                        return Err(AdversaryViolation::IllegalOmission { round, from, to });
                    }
                    self.links.insert((from, to));
                }
            }
        }
        Ok(())
    }

    pub fn is_omitted<P>(&self, index: usize, env: &Envelope<P>) -> bool {
        self.by_index[index]
            || self.from_stamp[env.from.index()] == self.round
            || self.to_stamp[env.to.index()] == self.round
            || (!self.links.is_empty() && self.links.contains(&(env.from, env.to)))
    }
}

/// Applies one action to a pending message list and returns the delivery
/// mask (`true` = delivered). `corrupted` is updated in place.
pub fn apply_adversary_action<P>(
    action: &AdversaryAction,
    pending: &[Envelope<P>],
    corrupted: &mut CorruptionSet,
    t: usize,
    round: u32,
) -> Result<Vec<bool>, AdversaryViolation> {
    let n = corrupted.round_of.len();
    let mut filter = OmissionFilter::new(n);
    filter.reset(round.max(1), pending.len());
    let mut newly = Vec::new();
    filter.apply(action, pending, corrupted, t, &mut newly)?;
    Ok(pending
        .iter()
        .enumerate()
        .map(|(i, e)| !filter.is_omitted(i, e))
        .collect())
}
