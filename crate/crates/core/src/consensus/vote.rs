use super::{decide_candidate, epoch_count, MainParams, ThresholdConfig};
use crate::epoch::{
    enough_neighbors, spread_receive, spread_send, Aggregator, EpochLayout, EpochSlot, GroupPartition, Links, Spreader,
};
use crate::error::{ConfigError, ProtocolFault};
use crate::model::{log_n, Bit, Envelope, ProcessId, StepCtx, VoteEvent};
use crate::overlay::{GraphConfig, OverlayGraph};
use crate::wire::{Msg, PackEntry};

/// The static part of one run of the epoch loop over the contiguous id block
/// `offset..offset + size`: its graph, groups and round layout.
#[derive(Clone, Debug)]
pub struct VoteInstance {
    pub offset: usize,
    pub size: usize,
    pub t: usize,
    pub graph: OverlayGraph,
    pub delta: usize,
    pub partition: GroupPartition,
    pub layout: EpochLayout,
    pub thresholds: ThresholdConfig,
}

impl VoteInstance {
    pub fn build(offset: usize, size: usize, t: usize, params: &MainParams, graph_seed: u64) -> Result<Self, ConfigError> {
        if size == 0 {
            return Err(ConfigError::EmptySystem);
        }
        let partition = GroupPartition::new(size);
        if partition.count() > 128 {
            return Err(ConfigError::invalid("n", "at most 128 groups (n <= 16384) are supported"));
        }
        if params.spread_coefficient == 0 {
            return Err(ConfigError::invalid("spread_coefficient", "must be positive"));
        }
        let graph_config = GraphConfig::from_coefficient(size, params.degree_coefficient, graph_seed);
        let layout = EpochLayout {
            stages: partition.stages(),
            spread_rounds: params.spread_coefficient * log_n(size),
            epochs: epoch_count(size, t, params.epoch_coefficient),
        };
        Ok(Self {
            offset,
            size,
            t,
            graph: OverlayGraph::generate(&graph_config),
            delta: graph_config.delta,
            partition,
            layout,
            thresholds: params.thresholds,
        })
    }

    /// Rounds of the epoch loop; the last vote happens in the local phase of
    /// the round after.
    pub fn epoch_rounds(&self) -> u32 {
        self.layout.total()
    }

    pub fn contains(&self, p: ProcessId) -> bool {
        (self.offset..self.offset + self.size).contains(&p.index())
    }

    pub fn global(&self, local: usize) -> ProcessId {
        ProcessId::from_index(self.offset + local)
    }

    pub fn spawn(&self, id: ProcessId, input: Bit) -> VoteState {
        let local = id.index() - self.offset;
        let g = self.partition.group_of(local);
        VoteState {
            local,
            b: input,
            operative: true,
            decided: false,
            agg: Aggregator::new(self.partition.position(local), self.partition.size(g)),
            links: Links::new(self.graph.neighbors(local)),
            spreader: None,
            vote: None,
        }
    }
}

/// Result of the two dissemination rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dissemination {
    /// Decide on the carried value.
    Decide(Bit),
    /// Operative and not ready: go to the deterministic fallback.
    Fallback,
    /// Inoperative and told nothing: wait for someone else's decision.
    Wait,
}

/// Per-process memory of the epoch loop.
#[derive(Clone, Debug)]
pub struct VoteState {
    local: usize,
    pub b: Bit,
    pub operative: bool,
    pub decided: bool,
    agg: Aggregator,
    links: Links,
    spreader: Option<Spreader>,
    /// Vote performed in the current local phase, if any.
    pub vote: Option<VoteEvent>,
}

impl VoteState {
    /// Local phase of relative round `rel` in `1..=epoch_rounds() + 1`:
    /// consumes round `rel − 1` (closing an epoch with a vote when it ends
    /// one) and queues the sends of round `rel`.
    pub fn step_epochs(
        &mut self,
        inst: &VoteInstance,
        rel: u32,
        inbox: &[Envelope<Msg>],
        ctx: &mut StepCtx<'_, Msg>,
    ) -> Result<(), ProtocolFault> {
        self.vote = None;
        let layout = &inst.layout;
        if rel > 1 {
            match layout.slot(rel - 1).1 {
                EpochSlot::Aggregate { stage, sub } => {
                    let first = inst.offset + inst.partition.members(inst.partition.group_of(self.local)).start;
                    let msgs = inbox.iter().map(|e| (e.from.index() - first, &e.payload));
                    if !self.agg.on_receive(stage, sub, msgs) {
                        self.operative = false;
                    }
                }
                EpochSlot::Spread { .. } => {
                    if self.operative {
                        let msgs: Vec<(u32, &[PackEntry])> = inbox
                            .iter()
                            .filter_map(|e| match &e.payload {
                                Msg::Spread(entries) => Some(((e.from.index() - inst.offset) as u32, entries.as_slice())),
                                _ => None,
                            })
                            .collect();
                        let spreader = self.spreader.as_mut().expect("operative process spreads");
                        let heard = spread_receive(spreader, &mut self.links, &msgs);
                        if !enough_neighbors(heard, inst.delta) {
                            self.operative = false;
                        }
                    }
                }
            }
            if layout.ends_epoch(rel - 1) && self.operative {
                self.cast_vote(inst, ctx)?;
            }
        }
        if rel > layout.total() {
            return Ok(());
        }
        if layout.starts_epoch(rel) {
            self.agg.start(self.operative.then_some(self.b));
            self.spreader = None;
        }
        match layout.slot(rel).1 {
            EpochSlot::Aggregate { stage, sub } => {
                let first = inst.offset + inst.partition.members(inst.partition.group_of(self.local)).start;
                self.agg
                    .on_send(stage, sub, |pos, msg| ctx.send(ProcessId::from_index(first + pos), msg));
            }
            EpochSlot::Spread { round } => {
                if round == 0 && self.operative {
                    let own = *self.agg.tally().expect("operative process holds its group counts");
                    let g = inst.partition.group_of(self.local);
                    self.spreader = Some(Spreader::new(inst.partition.count(), g, own, self.links.len()));
                }
                if self.operative {
                    let spreader = self.spreader.as_mut().expect("operative process spreads");
                    let offset = inst.offset;
                    spread_send(spreader, &self.links, |v, msg| {
                        ctx.send(ProcessId::from_index(offset + v as usize), msg)
                    });
                }
            }
        }
        Ok(())
    }

    fn cast_vote(&mut self, inst: &VoteInstance, ctx: &mut StepCtx<'_, Msg>) -> Result<(), ProtocolFault> {
        let (ones, zeros) = self.spreader.as_ref().map_or((0, 0), Spreader::totals);
        let fault = ProtocolFault::DegenerateInput {
            process: ctx.me(),
            round: ctx.round(),
        };
        let mut flip = || ctx.random_bit();
        let update = decide_candidate(ones, zeros, &inst.thresholds, self.b, Some(&mut flip)).ok_or(fault)?;
        self.b = update.value;
        self.decided |= update.decided();
        self.vote = Some(VoteEvent {
            branch: update.branch,
            hit_decide_high: update.hit_decide_high,
            hit_decide_low: update.hit_decide_low,
        });
        Ok(())
    }

    /// Whether this process broadcasts its value in the first dissemination round.
    pub fn broadcasts(&self) -> bool {
        self.operative && self.decided
    }

    /// Second dissemination round: adopts the lowest sender's value unless
    /// broadcasting, then classifies the outcome.
    pub fn settle(&mut self, inbox: &[Envelope<Msg>]) -> Dissemination {
        let first = super::main_protocol::first_decision(inbox);
        if !self.broadcasts() {
            if let Some(v) = first {
                self.b = v;
            }
        }
        if self.decided || (!self.operative && first.is_some()) {
            Dissemination::Decide(self.b)
        } else if self.operative {
            Dissemination::Fallback
        } else {
            Dissemination::Wait
        }
    }

    /// Disregarded overlay links so far.
    pub fn disregarded(&self) -> usize {
        self.links.disregarded_count()
    }

    pub fn group_counts(&self) -> Option<(u32, u32)> {
        self.agg.tally().map(|t| t.counts())
    }

    pub fn totals(&self) -> Option<(u64, u64)> {
        self.spreader.as_ref().map(Spreader::totals)
    }
}
