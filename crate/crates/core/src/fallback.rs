//! Deterministic consensus by chain-certified flooding, tolerant to omission
//! faults. Runs `t + 1` communication rounds and decides on the smallest
//! accepted value.

use crate::error::{ConfigError, EngineError};
use crate::model::{
    run_execution, AdversaryStrategy, Bit, Envelope, Execution, Process, ProcessId, ProcessSnapshot, Protocol,
    Schedule, Segment, SegmentKind, StepCtx, SystemConfig, TraceLevel,
};
use crate::wire::{ChainValue, Msg};

/// Accepts `chain` in round `round` if it has at least `round` distinct ids
/// and ends with the sender.
pub fn chain_acceptable(chain: &[ProcessId], round: u32, sender: ProcessId) -> bool {
    if chain.len() < round as usize || chain.last() != Some(&sender) {
        return false;
    }
    let mut ids: Vec<u32> = chain.iter().map(|p| p.get()).collect();
    ids.sort_unstable();
    ids.windows(2).all(|w| w[0] != w[1])
}

/// One participant's flooding state.
#[derive(Clone, Debug)]
pub struct ChainFlood {
    me: ProcessId,
    rounds: u32,
    accepted: [bool; 2],
    /// Values accepted last round, with the chain that certified them.
    fresh: Vec<ChainValue>,
}

impl ChainFlood {
    /// `t` is the fault budget; the flood lasts `t + 1` rounds.
    pub fn new(me: ProcessId, input: Bit, t: usize) -> Self {
        let mut accepted = [false; 2];
        accepted[input.as_u8() as usize] = true;
        Self {
            me,
            rounds: t as u32 + 1,
            accepted,
            fresh: vec![ChainValue {
                value: input,
                chain: Vec::new(),
            }],
        }
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    /// Message for communication round `round` (1-based), if any.
    pub fn outgoing(&mut self, round: u32) -> Option<Msg> {
        if round > self.rounds || self.fresh.is_empty() {
            self.fresh.clear();
            return None;
        }
        let me = self.me;
        let items = self
            .fresh
            .drain(..)
            .map(|mut c| {
                c.chain.push(me);
                c
            })
            .collect();
        Some(Msg::Chains(items))
    }

    /// Processes what arrived in communication round `round`.
    pub fn absorb<'m>(&mut self, round: u32, inbox: impl IntoIterator<Item = (ProcessId, &'m Msg)>) {
        for (from, msg) in inbox {
            let Msg::Chains(items) = msg else { continue };
            for c in items {
                let slot = c.value.as_u8() as usize;
                if !self.accepted[slot] && !c.chain.contains(&self.me) && chain_acceptable(&c.chain, round, from) {
                    self.accepted[slot] = true;
                    self.fresh.push(c.clone());
                }
            }
        }
    }

    /// Smallest accepted value.
    pub fn decision(&self) -> Bit {
        if self.accepted[0] {
            Bit::Zero
        } else {
            Bit::One
        }
    }

    pub fn accepted(&self, v: Bit) -> bool {
        self.accepted[v.as_u8() as usize]
    }
}

/// The flood on its own: everyone participates, decides after `t + 1`
/// communication rounds and halts, so a run lasts `t + 2` rounds.
#[derive(Clone, Debug)]
pub struct FallbackProtocol {
    n: usize,
    t: usize,
    schedule: Schedule,
}

impl FallbackProtocol {
    pub fn new(n: usize, t: usize) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::EmptySystem);
        }
        if t + 1 > n {
            return Err(ConfigError::FaultBound {
                protocol: "fallback",
                bound: "t + 1 <= n",
                n,
                t,
            });
        }
        let total = t as u32 + 2;
        Ok(Self {
            n,
            t,
            schedule: Schedule {
                segments: vec![Segment::new("fallback", SegmentKind::Fallback, 1, total)],
                checkpoints: vec![total],
                vote_rounds: Vec::new(),
                fault_free_rounds: total,
                max_rounds: total,
            },
        })
    }
}

#[derive(Clone, Debug)]
pub struct FallbackNode {
    flood: ChainFlood,
    input: Bit,
}

impl Process for FallbackNode {
    type Payload = Msg;

    fn step(&mut self, round: u32, inbox: &[Envelope<Msg>], ctx: &mut StepCtx<'_, Msg>) {
        if round > 1 {
            self.flood.absorb(round - 1, inbox.iter().map(|e| (e.from, &e.payload)));
        }
        if round > self.flood.rounds() {
            ctx.decide(self.flood.decision());
            ctx.halt();
            return;
        }
        if let Some(msg) = self.flood.outgoing(round) {
            ctx.send_all(msg);
        }
    }

    fn snapshot(&self) -> ProcessSnapshot {
        ProcessSnapshot {
            candidate: Some(self.input),
            operative: true,
            in_fallback: true,
            ..Default::default()
        }
    }
}

impl Protocol for FallbackProtocol {
    type Node = FallbackNode;

    fn name(&self) -> &'static str {
        "fallback"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn spawn(&self, id: ProcessId, input: Bit) -> FallbackNode {
        FallbackNode {
            flood: ChainFlood::new(id, input, self.t),
            input,
        }
    }
}

pub fn run_fallback(
    inputs: &[Bit],
    t: usize,
    seed: u64,
    adversary: &mut dyn AdversaryStrategy<Msg>,
    level: TraceLevel,
) -> Result<Execution, EngineError> {
    let protocol = FallbackProtocol::new(inputs.len(), t)?;
    let config = SystemConfig::new(inputs.len(), t, seed)?;
    run_execution(&config, inputs, &protocol, adversary, level)
}
