//! Single-call drivers for the two epoch subroutines, used for testing them
//! in isolation under the engine and an adversary.

use super::aggregation::Aggregator;
use super::partition::GroupPartition;
use super::spreading::{enough_neighbors, spread_receive, spread_send, Links, Spreader};
use super::{EpochLayout, EpochSlot};
use crate::error::{ConfigError, EngineError};
use crate::model::{
    run_collect, AdversaryStrategy, Bit, Envelope, Execution, Process, ProcessId, ProcessSnapshot, Protocol, Schedule,
    Segment, SegmentKind, StepCtx, SystemConfig, TraceLevel,
};
use crate::overlay::OverlayGraph;
use crate::wire::{Msg, PackEntry, Tally};

fn single_segment_schedule(label: &str, kind: SegmentKind, comm_rounds: u32) -> Schedule {
    let total = comm_rounds + 1;
    Schedule {
        segments: vec![Segment::new(label, kind, 1, total)],
        checkpoints: vec![total],
        vote_rounds: Vec::new(),
        fault_free_rounds: total,
        max_rounds: total,
    }
}

/// One group aggregation call over every group of the partition at once.
#[derive(Clone, Debug)]
pub struct AggregationProtocol {
    partition: GroupPartition,
    operative: Vec<bool>,
    layout: EpochLayout,
    schedule: Schedule,
}

impl AggregationProtocol {
    /// `operative[i]` is process `i`'s flag at entry.
    pub fn new(operative: Vec<bool>) -> Result<Self, ConfigError> {
        let n = operative.len();
        if n == 0 {
            return Err(ConfigError::EmptySystem);
        }
        let partition = GroupPartition::new(n);
        let layout = EpochLayout {
            stages: partition.stages(),
            spread_rounds: 0,
            epochs: 1,
        };
        let schedule = single_segment_schedule("aggregation", SegmentKind::Epoch, layout.total());
        Ok(Self {
            partition,
            operative,
            layout,
            schedule,
        })
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }
}

#[derive(Clone, Debug)]
pub struct AggregationNode {
    first: usize,
    agg: Aggregator,
    input: Bit,
    entry_operative: bool,
    layout: EpochLayout,
}

impl Process for AggregationNode {
    type Payload = Msg;

    fn step(&mut self, round: u32, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        if round == 1 {
            self.agg.start(self.entry_operative.then_some(self.input));
        } else if let (_, EpochSlot::Aggregate { stage, sub }) = self.layout.slot(round - 1) {
            let first = self.first;
            self.agg
                .on_receive(stage, sub, inbox.iter().map(|e| (e.from.index() - first, &e.payload)));
        }
        if round > self.layout.total() {
            ctx.halt();
            return;
        }
        if let (_, EpochSlot::Aggregate { stage, sub }) = self.layout.slot(round) {
            let first = self.first;
            self.agg
                .on_send(stage, sub, |pos, msg| ctx.send(ProcessId::from_index(first + pos), msg));
        }
    }

    fn snapshot(&self) -> ProcessSnapshot {
        ProcessSnapshot {
            candidate: Some(self.input),
            operative: self.agg.is_source(),
            ..Default::default()
        }
    }
}

impl Protocol for AggregationProtocol {
    type Node = AggregationNode;

    fn name(&self) -> &'static str {
        "group-aggregation"
    }

    fn n(&self) -> usize {
        self.operative.len()
    }

    fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn spawn(&self, id: ProcessId, input: Bit) -> AggregationNode {
        let v = id.index();
        let g = self.partition.group_of(v);
        AggregationNode {
            first: self.partition.members(g).start,
            agg: Aggregator::new(self.partition.position(v), self.partition.size(g)),
            input,
            entry_operative: self.operative[v],
            layout: self.layout,
        }
    }
}

/// What one process returns from an aggregation call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AggregationOutcome {
    pub group: usize,
    /// Root-bag counts; `None` when the process ended inoperative.
    pub tally: Option<Tally>,
}

impl AggregationOutcome {
    pub fn operative(&self) -> bool {
        self.tally.is_some()
    }
}

/// Runs one aggregation call on `bits` with entry flags `operative`.
pub fn run_group_aggregation(
    bits: &[Bit],
    operative: &[bool],
    t: usize,
    seed: u64,
    adversary: &mut dyn AdversaryStrategy<Msg>,
    level: TraceLevel,
) -> Result<(Vec<AggregationOutcome>, Execution), EngineError> {
    let protocol = AggregationProtocol::new(operative.to_vec())?;
    let config = SystemConfig::new(bits.len(), t, seed)?;
    let (execution, nodes) = run_collect(&config, bits, &protocol, adversary, level)?;
    let outcomes = nodes
        .iter()
        .enumerate()
        .map(|(v, node)| AggregationOutcome {
            group: protocol.partition.group_of(v),
            tally: node.agg.tally().copied(),
        })
        .collect();
    Ok((outcomes, execution))
}

/// One group-count spreading call over an overlay graph.
#[derive(Clone, Debug)]
pub struct SpreadingProtocol {
    graph: OverlayGraph,
    partition: GroupPartition,
    delta: usize,
    pairs: Vec<Option<Tally>>,
    rounds: u32,
    schedule: Schedule,
}

impl SpreadingProtocol {
    /// `pairs[i]` is process `i`'s own group's counts, `None` if it enters
    /// inoperative. Runs `rounds` communication rounds; a process hearing
    /// from fewer than `delta / 3` neighbours in a round drops out.
    pub fn new(graph: OverlayGraph, delta: usize, pairs: Vec<Option<Tally>>, rounds: u32) -> Result<Self, ConfigError> {
        let n = graph.n();
        if n == 0 {
            return Err(ConfigError::EmptySystem);
        }
        if pairs.len() != n {
            return Err(ConfigError::InputLength {
                expected: n,
                got: pairs.len(),
            });
        }
        let partition = GroupPartition::new(n);
        if partition.count() > 128 {
            return Err(ConfigError::invalid("n", "at most 128 groups are supported"));
        }
        Ok(Self {
            schedule: single_segment_schedule("spreading", SegmentKind::Epoch, rounds),
            graph,
            partition,
            delta,
            pairs,
            rounds,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SpreadingNode {
    links: Links,
    spreader: Option<Spreader>,
    operative: bool,
    delta: usize,
    rounds: u32,
}

impl Process for SpreadingNode {
    type Payload = Msg;

    fn step(&mut self, round: u32, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        if round > 1 && self.operative {
            let msgs: Vec<(u32, &[PackEntry])> = inbox
                .iter()
                .filter_map(|e| match &e.payload {
                    Msg::Spread(entries) => Some((e.from.index() as u32, entries.as_slice())),
                    _ => None,
                })
                .collect();
            let spreader = self.spreader.as_mut().expect("operative spreader");
            let heard = spread_receive(spreader, &mut self.links, &msgs);
            if !enough_neighbors(heard, self.delta) {
                self.operative = false;
            }
        }
        if round > self.rounds {
            ctx.halt();
            return;
        }
        if self.operative {
            let spreader = self.spreader.as_mut().expect("operative spreader");
            spread_send(spreader, &self.links, |v, msg| ctx.send(ProcessId::from_index(v as usize), msg));
        }
    }

    fn snapshot(&self) -> ProcessSnapshot {
        ProcessSnapshot {
            operative: self.operative,
            ..Default::default()
        }
    }
}

impl Protocol for SpreadingProtocol {
    type Node = SpreadingNode;

    fn name(&self) -> &'static str {
        "group-spreading"
    }

    fn n(&self) -> usize {
        self.graph.n()
    }

    fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn spawn(&self, id: ProcessId, _input: Bit) -> SpreadingNode {
        let v = id.index();
        let links = Links::new(self.graph.neighbors(v));
        let own_group = self.partition.group_of(v);
        let spreader = self
            .pairs[v]
            .map(|pair| Spreader::new(self.partition.count(), own_group, pair, links.len()));
        SpreadingNode {
            operative: spreader.is_some(),
            spreader,
            delta: self.delta,
            links,
            rounds: self.rounds,
        }
    }
}

/// What one process returns from a spreading call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpreadOutcome {
    pub operative: bool,
    pub ones: u64,
    pub zeros: u64,
    pub packs: Vec<Option<Tally>>,
}

/// Runs one spreading call. Processes that become inoperative keep whatever
/// they had collected.
pub fn run_group_spreading(
    graph: &OverlayGraph,
    delta: usize,
    pairs: &[Option<Tally>],
    rounds: u32,
    t: usize,
    seed: u64,
    adversary: &mut dyn AdversaryStrategy<Msg>,
    level: TraceLevel,
) -> Result<(Vec<SpreadOutcome>, Execution), EngineError> {
    let n = graph.n();
    let protocol = SpreadingProtocol::new(graph.clone(), delta, pairs.to_vec(), rounds)?;
    let config = SystemConfig::new(n, t, seed)?;
    let inputs = vec![Bit::Zero; n];
    let (execution, nodes) = run_collect(&config, &inputs, &protocol, adversary, level)?;
    let groups = protocol.partition.count();
    let outcomes = nodes
        .into_iter()
        .map(|node| match &node.spreader {
            Some(s) => {
                let (ones, zeros) = s.totals();
                SpreadOutcome {
                    operative: node.operative,
                    ones,
                    zeros,
                    packs: (0..groups).map(|g| s.entry(g).copied()).collect(),
                }
            }
            None => SpreadOutcome {
                operative: false,
                ones: 0,
                zeros: 0,
                packs: vec![None; groups],
            },
        })
        .collect();
    Ok((outcomes, execution))
}
