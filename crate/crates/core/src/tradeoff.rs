//! Trading rounds for randomness: `x` super-processes take turns running the
//! epoch loop among themselves and flood the outcome over the overlay graph;
//! a final all-to-all safety vote decides.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::consensus::{decide_candidate, first_decision, MainParams, VoteInstance, VoteState};
use crate::epoch::{enough_neighbors, Links};
use crate::error::ConfigError;
use crate::fallback::ChainFlood;
use crate::model::{
    derive_seed, log_n, Bit, Envelope, ExecutionTrace, Process, ProcessId, ProcessSnapshot, Protocol, Schedule,
    Segment, SegmentKind, StepCtx, VoteEvent,
};
use crate::overlay::{GraphConfig, OverlayGraph};
use crate::wire::Msg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TradeoffParams {
    /// Number of super-processes.
    pub x: usize,
    /// Constants for the inner runs and the overlay graph.
    pub inner: MainParams,
    /// Flooding lasts `c·log n` rounds.
    pub flood_coefficient: u32,
    /// Test hook: before the safety vote, every process sets its value to
    /// the parity of its id.
    pub force_mixed: bool,
}

impl Default for TradeoffParams {
    fn default() -> Self {
        Self {
            x: 1,
            inner: MainParams::default(),
            flood_coefficient: 2,
            force_mixed: false,
        }
    }
}

/// Fault budget handed to a super-process of `size` members.
pub fn inner_budget(size: usize, t: usize) -> usize {
    t.min((size / 30).saturating_sub(1))
}

#[derive(Debug)]
struct Shared {
    x: usize,
    t: usize,
    instances: Vec<VoteInstance>,
    graph: OverlayGraph,
    delta: usize,
    /// Rounds reserved for each inner run.
    budget: u32,
    flood_rounds: u32,
    force_mixed: bool,
}

impl Shared {
    fn phase_len(&self) -> u32 {
        self.budget + self.flood_rounds
    }

    /// First round after all phases.
    fn safety_start(&self) -> u32 {
        self.x as u32 * self.phase_len() + 1
    }

    fn super_process_of(&self, p: ProcessId) -> usize {
        self.instances
            .iter()
            .position(|inst| inst.contains(p))
            .expect("super-processes cover every id")
    }
}

/// The super-process protocol on `n` processes.
#[derive(Clone, Debug)]
pub struct TradeoffProtocol {
    shared: Arc<Shared>,
    schedule: Schedule,
}

impl TradeoffProtocol {
    pub fn new(n: usize, t: usize, params: TradeoffParams) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::EmptySystem);
        }
        if 60 * t >= n {
            return Err(ConfigError::FaultBound {
                protocol: "tradeoff",
                bound: "t < n/60",
                n,
                t,
            });
        }
        let x = params.x;
        if x == 0 || x > n {
            return Err(ConfigError::invalid("x", format!("must lie in 1..={n}")));
        }
        if params.flood_coefficient == 0 {
            return Err(ConfigError::invalid("flood_coefficient", "must be positive"));
        }
        let mut instances = Vec::with_capacity(x);
        for i in 0..x {
            let start = i * n / x;
            let size = (i + 1) * n / x - start;
            let seed = derive_seed(params.inner.graph_seed, i as u64 + 1);
            instances.push(VoteInstance::build(start, size, inner_budget(size, t), &params.inner, seed)?);
        }
        let budget = instances.iter().map(|inst| inst.epoch_rounds() + 2).max().unwrap_or(2);
        let graph_config = GraphConfig::from_coefficient(n, params.inner.degree_coefficient, params.inner.graph_seed);
        let shared = Shared {
            x,
            t,
            instances,
            graph: OverlayGraph::generate(&graph_config),
            delta: graph_config.delta,
            budget,
            flood_rounds: params.flood_coefficient * log_n(n),
            force_mixed: params.force_mixed,
        };
        let schedule = tradeoff_schedule(&shared);
        Ok(Self {
            shared: Arc::new(shared),
            schedule,
        })
    }

    /// Rounds reserved for each inner run.
    pub fn phase_budget(&self) -> u32 {
        self.shared.budget
    }

    pub fn flood_rounds(&self) -> u32 {
        self.shared.flood_rounds
    }

    /// Termination round when nobody needs the fallback.
    pub fn closed_form_rounds(&self) -> u32 {
        self.shared.safety_start() + 2
    }

    /// Member range (0-based) of each super-process.
    pub fn super_processes(&self) -> Vec<std::ops::Range<usize>> {
        self.shared
            .instances
            .iter()
            .map(|inst| inst.offset..inst.offset + inst.size)
            .collect()
    }

    /// Last round of phase `i` (0-based), after its flooding.
    pub fn phase_end(&self, i: usize) -> u32 {
        (i as u32 + 1) * self.shared.phase_len()
    }

    /// Super-processes with at least 29/30 non-faulty members, at least one
    /// of which is operative when the phase ends.
    pub fn reliable_super_processes(&self, trace: &ExecutionTrace) -> Vec<usize> {
        self.super_processes()
            .into_iter()
            .enumerate()
            .filter(|(i, members)| {
                let size = members.len();
                let faulty = members
                    .clone()
                    .filter(|&v| trace.is_faulty(ProcessId::from_index(v)))
                    .count();
                let end = (self.phase_end(*i) + 1).min(trace.len());
                let operative = trace.operative_at(end);
                30 * (size - faulty) >= 29 * size
                    && members.clone().any(|v| {
                        operative.is_some_and(|o| o.contains(ProcessId::from_index(v)))
                            && !trace.is_faulty(ProcessId::from_index(v))
                    })
            })
            .map(|(i, _)| i)
            .collect()
    }
}

fn tradeoff_schedule(shared: &Shared) -> Schedule {
    let len = shared.phase_len();
    let mut segments = Vec::new();
    let mut vote_rounds = Vec::new();
    let mut checkpoints = Vec::new();
    for (i, inst) in shared.instances.iter().enumerate() {
        let base = i as u32 * len + 1;
        segments.push(Segment::new(format!("phase {}", i + 1), SegmentKind::Phase, base, shared.budget));
        segments.push(Segment::new(
            format!("flood {}", i + 1),
            SegmentKind::Flood,
            base + shared.budget,
            shared.flood_rounds,
        ));
        let per = inst.layout.per_epoch();
        vote_rounds.extend((1..=inst.layout.epochs).map(|e| base + e * per));
        checkpoints.extend((1..=inst.layout.epochs).map(|e| base + e * per));
        checkpoints.push(base + len);
    }
    let s = shared.safety_start();
    segments.push(Segment::new("safety", SegmentKind::Safety, s, 2));
    segments.push(Segment::new("fallback", SegmentKind::Fallback, s + 2, shared.t as u32 + 3));
    vote_rounds.push(s + 1);
    checkpoints.push(s + 1);
    checkpoints.sort_unstable();
    checkpoints.dedup();
    Schedule {
        segments,
        checkpoints,
        vote_rounds,
        fault_free_rounds: s + 2,
        max_rounds: s + shared.t as u32 + 4,
    }
}

#[derive(Clone, Debug)]
enum Stage {
    Running,
    Fallback(ChainFlood),
    Waiting,
}

#[derive(Clone, Debug)]
pub struct TradeoffNode {
    shared: Arc<Shared>,
    me: ProcessId,
    super_process: usize,
    b: Bit,
    operative: bool,
    decided: bool,
    links: Links,
    inner: Option<VoteState>,
    consensus_decision: Option<Bit>,
    vote: Option<VoteEvent>,
    stage: Stage,
    /// Flood messages that disagreed with an already held value.
    pub flood_conflicts: u32,
}

impl TradeoffNode {
    fn flood_receive(&mut self, inbox: &[Envelope<Msg>]) {
        let mut senders = Vec::new();
        let mut values = Vec::new();
        for e in inbox {
            if let Msg::Flood(v) = e.payload {
                senders.push(e.from.index() as u32);
                values.push(v);
            }
        }
        let mut cd = self.consensus_decision;
        let mut conflicts = 0;
        let heard = self.links.receive_round(&senders, |_, j| match (cd, values[j]) {
            (None, Some(v)) => cd = Some(v),
            (Some(mine), Some(v)) if mine != v => conflicts += 1,
            _ => {}
        });
        self.consensus_decision = cd;
        self.flood_conflicts += conflicts;
        if !enough_neighbors(heard, self.shared.delta) {
            self.operative = false;
        }
    }

    fn flood_send(&self, ctx: &mut StepCtx<'_, Msg>) {
        for (_, v) in self.links.active() {
            ctx.send(ProcessId::from_index(v as usize), Msg::Flood(self.consensus_decision));
        }
    }

    /// Local phase of round `rel` (1-based) of phase `i`.
    fn step_phase(&mut self, i: usize, rel: u32, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        let shared = Arc::clone(&self.shared);
        let budget = shared.budget;
        if rel == 1 {
            self.consensus_decision = None;
            self.inner = (i == self.super_process && self.operative).then(|| shared.instances[i].spawn(self.me, self.b));
        }
        if rel <= budget {
            let Some(state) = self.inner.as_mut() else { return };
            let inst = &shared.instances[i];
            let loop_end = inst.epoch_rounds();
            if rel <= loop_end + 1 {
                if let Err(fault) = state.step_epochs(inst, rel, inbox, ctx) {
                    ctx.fail(fault);
                    return;
                }
                self.vote = state.vote;
                if rel == loop_end + 1 && state.broadcasts() {
                    let members = inst.offset..inst.offset + inst.size;
                    for v in members.filter(|&v| v != self.me.index()) {
                        ctx.send(ProcessId::from_index(v), Msg::Decision(state.b));
                    }
                }
            } else if rel == loop_end + 2 {
                state.settle(inbox);
                self.b = state.b;
                self.consensus_decision = Some(state.b);
            }
            return;
        }
        if !self.operative {
            return;
        }
        if rel > budget + 1 {
            self.flood_receive(inbox);
        }
        if self.operative {
            self.flood_send(ctx);
        }
    }

    /// Receives the last flooding round of the phase that just ended.
    fn close_phase(&mut self, inbox: &[Envelope<Msg>]) {
        if !self.operative {
            return;
        }
        self.flood_receive(inbox);
        if let Some(v) = self.consensus_decision {
            self.b = v;
        }
    }

    fn open_safety(&mut self, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        self.close_phase(inbox);
        self.inner = None;
        if self.shared.force_mixed {
            self.b = Bit::from_bool(self.me.get() % 2 == 1);
        }
        if self.operative {
            ctx.send_all(Msg::Vote(self.b));
        }
    }

    /// Counts received votes plus its own and applies the thresholds
    /// without a coin; ready processes broadcast their value.
    fn safety_vote(&mut self, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        if !self.operative {
            return;
        }
        let (mut ones, mut zeros) = (0u64, 0u64);
        let received = inbox.iter().filter_map(|e| match e.payload {
            Msg::Vote(v) => Some(v),
            _ => None,
        });
        for v in std::iter::once(self.b).chain(received) {
            match v {
                Bit::One => ones += 1,
                Bit::Zero => zeros += 1,
            }
        }
        let thresholds = self.shared.instances[0].thresholds;
        if let Some(u) = decide_candidate(ones, zeros, &thresholds, self.b, None) {
            self.b = u.value;
            self.decided |= u.decided();
            self.vote = Some(VoteEvent {
                branch: u.branch,
                hit_decide_high: u.hit_decide_high,
                hit_decide_low: u.hit_decide_low,
            });
        }
        if self.decided {
            ctx.send_all(Msg::Decision(self.b));
        }
    }

    fn settle(&mut self, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        let first = first_decision(inbox);
        if !(self.operative && self.decided) {
            if let Some(v) = first {
                self.b = v;
            }
        }
        if self.decided || (!self.operative && first.is_some()) {
            ctx.decide(self.b);
            ctx.halt();
        } else if self.operative {
            let mut flood = ChainFlood::new(self.me, self.b, self.shared.t);
            if let Some(msg) = flood.outgoing(1) {
                ctx.send_all(msg);
            }
            self.stage = Stage::Fallback(flood);
        } else {
            self.stage = Stage::Waiting;
        }
    }
}

impl Process for TradeoffNode {
    type Payload = Msg;

    fn step(&mut self, round: u32, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        self.vote = None;
        let shared = Arc::clone(&self.shared);
        let len = shared.phase_len();
        let s = shared.safety_start();
        if round < s {
            let i = ((round - 1) / len) as usize;
            let rel = (round - 1) % len + 1;
            if rel == 1 && i > 0 {
                self.close_phase(inbox);
            }
            self.step_phase(i, rel, inbox, ctx);
            return;
        }
        if matches!(self.stage, Stage::Running) {
            if round == s {
                self.open_safety(inbox, ctx);
            } else if round == s + 1 {
                self.safety_vote(inbox, ctx);
            } else {
                self.settle(inbox, ctx);
            }
            return;
        }
        match &mut self.stage {
            Stage::Running => unreachable!(),
            Stage::Fallback(flood) => {
                let k = round - (s + 2);
                flood.absorb(k, inbox.iter().map(|e| (e.from, &e.payload)));
                if k >= flood.rounds() {
                    let v = flood.decision();
                    self.b = v;
                    ctx.send_all(Msg::Decision(v));
                    ctx.decide(v);
                    ctx.halt();
                } else if let Some(msg) = flood.outgoing(k + 1) {
                    ctx.send_all(msg);
                }
            }
            Stage::Waiting => {
                if let Some(v) = first_decision(inbox) {
                    self.b = v;
                    ctx.decide(v);
                    ctx.halt();
                }
            }
        }
    }

    fn snapshot(&self) -> ProcessSnapshot {
        ProcessSnapshot {
            candidate: Some(self.b),
            operative: self.operative,
            ready: self.decided,
            vote: self.vote,
            in_fallback: matches!(self.stage, Stage::Fallback(_)),
        }
    }
}

impl Protocol for TradeoffProtocol {
    type Node = TradeoffNode;

    fn name(&self) -> &'static str {
        "tradeoff"
    }

    fn n(&self) -> usize {
        self.shared.graph.n()
    }

    fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn spawn(&self, id: ProcessId, input: Bit) -> TradeoffNode {
        TradeoffNode {
            shared: Arc::clone(&self.shared),
            me: id,
            super_process: self.shared.super_process_of(id),
            b: input,
            operative: true,
            decided: false,
            links: Links::new(self.shared.graph.neighbors(id.index())),
            inner: None,
            consensus_decision: None,
            vote: None,
            stage: Stage::Running,
            flood_conflicts: 0,
        }
    }
}
