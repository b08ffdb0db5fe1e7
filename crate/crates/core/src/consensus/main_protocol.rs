use std::sync::Arc;

use super::vote::{Dissemination, VoteInstance, VoteState};
use super::MainParams;
use crate::error::ConfigError;
use crate::fallback::ChainFlood;
use crate::model::{
    Bit, Envelope, Process, ProcessId, ProcessSnapshot, Protocol, Schedule, Segment, SegmentKind, StepCtx,
};
use crate::wire::Msg;

/// The full protocol on `n` processes: epochs, dissemination, and fallback.
///
/// Round layout with `R = epochs · per_epoch`: rounds `1..=R` run the epoch
/// loop, the last vote and the decision broadcast happen in round `R + 1`,
/// and processes settle in round `R + 2`. Fallback participants then flood
/// for `t + 1` rounds, decide and broadcast in round `R + t + 3`, and waiting
/// processes decide one round later.
#[derive(Clone, Debug)]
pub struct MainProtocol {
    instance: Arc<VoteInstance>,
    params: MainParams,
    schedule: Schedule,
}

impl MainProtocol {
    pub fn new(n: usize, t: usize, params: MainParams) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::EmptySystem);
        }
        if 30 * t >= n {
            return Err(ConfigError::FaultBound {
                protocol: "main",
                bound: "t < n/30",
                n,
                t,
            });
        }
        params.thresholds.validate(n, t)?;
        let instance = Arc::new(VoteInstance::build(0, n, t, &params, params.graph_seed)?);
        let schedule = main_schedule(&instance, t);
        Ok(Self {
            instance,
            params,
            schedule,
        })
    }

    pub fn instance(&self) -> &VoteInstance {
        &self.instance
    }

    pub fn params(&self) -> &MainParams {
        &self.params
    }

    /// Termination round when nobody needs the fallback.
    pub fn closed_form_rounds(&self) -> u32 {
        self.instance.epoch_rounds() + 2
    }
}

fn main_schedule(inst: &VoteInstance, t: usize) -> Schedule {
    let per = inst.layout.per_epoch();
    let epochs = inst.layout.epochs;
    let loop_end = inst.epoch_rounds();
    let mut segments: Vec<Segment> = (0..epochs)
        .map(|e| Segment::new(format!("epoch {}", e + 1), SegmentKind::Epoch, e * per + 1, per))
        .collect();
    segments.push(Segment::new("dissemination", SegmentKind::Final, loop_end + 1, 1));
    segments.push(Segment::new("fallback", SegmentKind::Fallback, loop_end + 2, t as u32 + 3));
    let vote_rounds: Vec<u32> = (1..=epochs).map(|e| e * per + 1).collect();
    Schedule {
        segments,
        checkpoints: vote_rounds.clone(),
        vote_rounds,
        fault_free_rounds: loop_end + 2,
        max_rounds: loop_end + t as u32 + 4,
    }
}

/// Value of the lowest-id sender of a decision, if any.
pub(crate) fn first_decision(inbox: &[Envelope<Msg>]) -> Option<Bit> {
    inbox.iter().find_map(|e| match e.payload {
        Msg::Decision(v) => Some(v),
        _ => None,
    })
}

#[derive(Clone, Debug)]
enum Stage {
    Voting,
    Fallback(ChainFlood),
    Waiting,
}

#[derive(Clone, Debug)]
pub struct MainNode {
    instance: Arc<VoteInstance>,
    state: VoteState,
    stage: Stage,
    force_undecided: bool,
}

impl MainNode {
    pub fn state(&self) -> &VoteState {
        &self.state
    }
}

impl Process for MainNode {
    type Payload = Msg;

    fn step(&mut self, round: u32, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        let loop_end = self.instance.epoch_rounds();
        match &mut self.stage {
            Stage::Voting if round <= loop_end + 1 => {
                if let Err(fault) = self.state.step_epochs(&self.instance, round, inbox, ctx) {
                    ctx.fail(fault);
                    return;
                }
                if round == loop_end + 1 {
                    if self.force_undecided {
                        self.state.decided = false;
                    }
                    if self.state.broadcasts() {
                        ctx.send_all(Msg::Decision(self.state.b));
                    }
                }
            }
            Stage::Voting => match self.state.settle(inbox) {
                Dissemination::Decide(v) => {
                    ctx.decide(v);
                    ctx.halt();
                }
                Dissemination::Fallback => {
                    let mut flood = ChainFlood::new(ctx.me(), self.state.b, self.instance.t);
                    if let Some(msg) = flood.outgoing(1) {
                        ctx.send_all(msg);
                    }
                    self.stage = Stage::Fallback(flood);
                }
                Dissemination::Wait => self.stage = Stage::Waiting,
            },
            Stage::Fallback(flood) => {
                let k = round - (loop_end + 2);
                flood.absorb(k, inbox.iter().map(|e| (e.from, &e.payload)));
                if k >= flood.rounds() {
                    let v = flood.decision();
                    self.state.b = v;
                    ctx.send_all(Msg::Decision(v));
                    ctx.decide(v);
                    ctx.halt();
                } else if let Some(msg) = flood.outgoing(k + 1) {
                    ctx.send_all(msg);
                }
            }
            Stage::Waiting => {
                if let Some(v) = first_decision(inbox) {
                    self.state.b = v;
                    ctx.decide(v);
                    ctx.halt();
                }
            }
        }
    }

    fn snapshot(&self) -> ProcessSnapshot {
        ProcessSnapshot {
            candidate: Some(self.state.b),
            operative: self.state.operative,
            ready: self.state.decided,
            vote: self.state.vote,
            in_fallback: matches!(self.stage, Stage::Fallback(_)),
        }
    }
}

impl Protocol for MainProtocol {
    type Node = MainNode;

    fn name(&self) -> &'static str {
        "main"
    }

    fn n(&self) -> usize {
        self.instance.size
    }

    fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn spawn(&self, id: ProcessId, input: Bit) -> MainNode {
        MainNode {
            instance: Arc::clone(&self.instance),
            state: self.instance.spawn(id, input),
            stage: Stage::Voting,
            force_undecided: self.params.force_undecided,
        }
    }
}
