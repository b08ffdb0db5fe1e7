use serde::{Deserialize, Serialize};

use super::adversary::{AdversaryObservation, AdversaryStrategy, CorruptionSet, Hook, NodeView, OmissionFilter};
use super::encoding::Encoding;
use super::ids::{Bit, ProcessId};
use super::message::{Envelope, Payload};
use super::metrics::Metrics;
use super::randomness::{ProcessRng, RandomDraw, RandomnessLedger};
use super::schedule::Schedule;
use super::snapshot::{ProcessSnapshot, VoteBranch};
use super::trace::{
    CheckpointRecord, Digest, ExecutionTrace, MessageRecord, OmittedMessage, OperativeSet, RoundDetail,
    RoundRecord, TraceLevel,
};
use crate::error::{ConfigError, EngineError, ProtocolFault};

/// System size, fault budget and master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
}

impl SystemConfig {
    pub fn new(n: usize, t: usize, seed: u64) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::EmptySystem);
        }
        if t >= n {
            return Err(ConfigError::BudgetTooLarge { n, t });
        }
        Ok(Self { n, t, seed })
    }
}

/// An irrevocable output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub value: Bit,
    pub round: u32,
}

pub type DecisionVector = Vec<Option<DecisionRecord>>;

/// Static facts about a run, handed to the adversary up front.
#[derive(Clone, Copy, Debug)]
pub struct RunInfo<'a> {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub protocol: &'a str,
    pub schedule: &'a Schedule,
}

/// Per-process handle for one local phase: sending, coin flips, deciding.
pub struct StepCtx<'a, P> {
    round: u32,
    me: ProcessId,
    n: usize,
    outbox: &'a mut Vec<Envelope<P>>,
    rng: &'a mut ProcessRng,
    draws: &'a mut Vec<RandomDraw>,
    decision: &'a mut Option<DecisionRecord>,
    halt: bool,
    fault: Option<ProtocolFault>,
}

impl<P: Payload> StepCtx<'_, P> {
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Queues a message for this round's communication phase.
    pub fn send(&mut self, to: ProcessId, payload: P) {
        if to == self.me || to.index() >= self.n {
            self.fault.get_or_insert(ProtocolFault::InvalidRecipient {
                from: self.me,
                to: to.get(),
            });
            return;
        }
        self.outbox.push(Envelope {
            from: self.me,
            to,
            payload,
        });
    }

    /// Sends `payload` to every other process.
    pub fn send_all(&mut self, payload: P) {
        for i in 0..self.n {
            let to = ProcessId::from_index(i);
            if to != self.me {
                self.send(to, payload.clone());
            }
        }
    }

    /// One access to the private random source.
    pub fn random_bits(&mut self, width: u8) -> u64 {
        let value = self.rng.draw(width);
        self.draws.push(RandomDraw {
            round: self.round,
            process: self.me,
            value,
            width,
        });
        value
    }

    pub fn random_bit(&mut self) -> Bit {
        Bit::from_bool(self.random_bits(1) == 1)
    }

    /// Records the irrevocable output. Later calls are ignored.
    pub fn decide(&mut self, value: Bit) {
        if self.decision.is_none() {
            *self.decision = Some(DecisionRecord {
                value,
                round: self.round,
            });
        }
    }

    pub fn decision(&self) -> Option<Bit> {
        self.decision.map(|d| d.value)
    }

    /// Stops the process after this round's communication phase.
    pub fn halt(&mut self) {
        self.halt = true;
    }

    pub fn fail(&mut self, fault: ProtocolFault) {
        self.fault.get_or_insert(fault);
    }
}

/// One process's state machine. `step` runs the local phase of `round`;
/// `inbox` holds messages delivered in the previous communication phase,
/// sorted by sender.
pub trait Process: Send {
    type Payload: Payload;

    fn step(&mut self, round: u32, inbox: &[Envelope<Self::Payload>], ctx: &mut StepCtx<'_, Self::Payload>);

    fn snapshot(&self) -> ProcessSnapshot;
}

/// Builds the per-process state machines of one protocol instance.
pub trait Protocol: Sync {
    type Node: Process;

    fn name(&self) -> &'static str;

    fn n(&self) -> usize;

    fn schedule(&self) -> &Schedule;

    fn spawn(&self, id: ProcessId, input: Bit) -> Self::Node;
}

pub type PayloadOf<P> = <<P as Protocol>::Node as Process>::Payload;

/// Result of one execution.
#[derive(Clone, Debug)]
pub struct Execution {
    pub decisions: DecisionVector,
    pub trace: ExecutionTrace,
    pub metrics: Metrics,
    pub ledger: RandomnessLedger,
}

impl Execution {
    pub fn faulty(&self, p: ProcessId) -> bool {
        self.trace.is_faulty(p)
    }
}

/// Runs `protocol` against `adversary` in lockstep rounds until every
/// non-faulty process has halted.
pub fn run_execution<P: Protocol>(
    config: &SystemConfig,
    inputs: &[Bit],
    protocol: &P,
    adversary: &mut dyn AdversaryStrategy<PayloadOf<P>>,
    level: TraceLevel,
) -> Result<Execution, EngineError> {
    run_collect(config, inputs, protocol, adversary, level).map(|(e, _)| e)
}

/// Like [`run_execution`], also returning the final process states.
pub fn run_collect<P: Protocol>(
    config: &SystemConfig,
    inputs: &[Bit],
    protocol: &P,
    adversary: &mut dyn AdversaryStrategy<PayloadOf<P>>,
    level: TraceLevel,
) -> Result<(Execution, Vec<P::Node>), EngineError> {
    let SystemConfig { n, t, seed } = *config;
    SystemConfig::new(n, t, seed)?;
    if inputs.len() != n {
        return Err(ConfigError::InputLength {
            expected: n,
            got: inputs.len(),
        }
        .into());
    }
    if protocol.n() != n {
        return Err(ConfigError::invalid("n", format!("protocol built for n={}, config has n={n}", protocol.n())).into());
    }
    let schedule = protocol.schedule();
    let enc = Encoding::for_n(n);
    let mut nodes: Vec<P::Node> = (0..n)
        .map(|i| protocol.spawn(ProcessId::from_index(i), inputs[i]))
        .collect();
    let mut rngs: Vec<ProcessRng> = (0..n).map(|i| ProcessRng::new(seed, ProcessId::from_index(i))).collect();
    let mut inboxes: Vec<Vec<Envelope<PayloadOf<P>>>> = (0..n).map(|_| Vec::new()).collect();
    let mut pending: Vec<Envelope<PayloadOf<P>>> = Vec::new();
    let mut decisions: DecisionVector = vec![None; n];
    let mut halted = vec![false; n];
    let mut views = vec![NodeView::default(); n];
    let mut corrupted = CorruptionSet::new(n);
    let mut filter = OmissionFilter::new(n);
    let mut trace = ExecutionTrace::new(n, t, level);
    let mut ledger = RandomnessLedger::default();
    let mut draws = Vec::new();
    let mut digest = Digest::default();
    let mut checkpoints = schedule.checkpoints.iter().copied().peekable();

    adversary.init(&RunInfo {
        n,
        t,
        seed,
        protocol: protocol.name(),
        schedule,
    });

    for round in 1..=schedule.max_rounds {
        pending.clear();
        draws.clear();
        let mut halting = Vec::new();
        for i in 0..n {
            if halted[i] {
                continue;
            }
            let mut ctx = StepCtx {
                round,
                me: ProcessId::from_index(i),
                n,
                outbox: &mut pending,
                rng: &mut rngs[i],
                draws: &mut draws,
                decision: &mut decisions[i],
                halt: false,
                fault: None,
            };
            nodes[i].step(round, &inboxes[i], &mut ctx);
            if let Some(fault) = ctx.fault {
                return Err(fault.into());
            }
            if ctx.halt {
                halting.push(i);
            }
        }
        for i in 0..n {
            views[i] = NodeView {
                snapshot: nodes[i].snapshot(),
                decision: decisions[i],
                halted: halted[i],
            };
        }

        filter.reset(round, pending.len());
        let mut new_corruptions = Vec::new();
        for hook in [Hook::AfterLocal, Hook::Delivery] {
            let obs = AdversaryObservation {
                round,
                hook,
                n,
                t,
                schedule,
                inputs,
                corrupted: &corrupted,
                pending: &pending,
                draws: &draws,
                states: &views,
                trace: &trace,
            };
            let action = match hook {
                Hook::AfterLocal => adversary.after_local(&obs),
                Hook::Delivery => adversary.during_delivery(&obs),
            };
            filter.apply(&action, &pending, &mut corrupted, t, &mut new_corruptions)?;
        }

        for &i in &halting {
            halted[i] = true;
        }
        for inbox in inboxes.iter_mut() {
            inbox.clear();
        }
        let full = level == TraceLevel::Full;
        let mut messages = Vec::new();
        let mut omitted = Vec::new();
        let mut bits_sent = 0u64;
        let messages_sent = pending.len() as u64;
        for (idx, env) in pending.drain(..).enumerate() {
            let bits = env.payload.bit_size(&enc);
            bits_sent += bits;
            let dropped = filter.is_omitted(idx, &env);
            if full {
                messages.push(MessageRecord {
                    from: env.from,
                    to: env.to,
                    bits: bits as u32,
                    delivered: !dropped,
                    payload: format!("{:?}", env.payload),
                });
            }
            if dropped {
                omitted.push(OmittedMessage {
                    from: env.from,
                    to: env.to,
                    bits: bits as u32,
                });
            } else if !halted[env.to.index()] {
                inboxes[env.to.index()].push(env);
            }
        }

        ledger.close_round(&draws);
        for &p in &new_corruptions {
            trace.corrupted.push((p, round));
        }
        let operative = OperativeSet::from_flags(views.iter().map(|v| v.snapshot.operative));
        let decided = decisions.iter().filter(|d| d.is_some()).count() as u32;

        digest.absorb(round as u64);
        digest.absorb(messages_sent);
        digest.absorb(bits_sent);
        for m in &omitted {
            digest.absorb(((m.from.get() as u64) << 32) | m.to.get() as u64);
        }
        for p in &new_corruptions {
            digest.absorb(p.get() as u64);
        }
        for d in &draws {
            digest.absorb(((d.process.get() as u64) << 8) | d.width as u64);
            digest.absorb(d.value);
        }
        for w in operative.words() {
            digest.absorb(*w);
        }
        digest.absorb(decided as u64);

        let scheduled = checkpoints.peek() == Some(&round);
        if scheduled {
            checkpoints.next();
        }
        if scheduled || views.iter().any(|v| v.snapshot.vote.is_some()) {
            trace.checkpoints.push(checkpoint(round, scheduled, &views));
        }

        trace.rounds.push(RoundRecord {
            round,
            messages_sent,
            bits_sent,
            omitted,
            new_corruptions,
            draws: draws.clone(),
            decided,
            operative,
            digest: digest.value(),
            detail: full.then(|| RoundDetail {
                messages,
                snapshots: views.iter().map(|v| v.snapshot).collect(),
            }),
        });

        let done = (0..n).all(|i| halted[i] || corrupted.contains(ProcessId::from_index(i)));
        if done {
            let metrics = Metrics::from_trace(&trace, &ledger, schedule);
            let execution = Execution {
                decisions,
                trace,
                metrics,
                ledger,
            };
            return Ok((execution, nodes));
        }
    }

    let undecided = (0..n)
        .map(ProcessId::from_index)
        .filter(|p| !halted[p.index()] && !corrupted.contains(*p))
        .collect();
    Err(EngineError::Liveness {
        round: schedule.max_rounds,
        undecided,
    })
}

fn checkpoint(round: u32, scheduled: bool, views: &[NodeView]) -> CheckpointRecord {
    let mut c = CheckpointRecord {
        round,
        scheduled,
        ..Default::default()
    };
    for v in views {
        let s = &v.snapshot;
        if s.operative {
            c.operative += 1;
            match s.candidate {
                Some(Bit::One) => c.operative_ones += 1,
                Some(Bit::Zero) => c.operative_zeros += 1,
                None => {}
            }
            if s.ready {
                c.operative_ready += 1;
            }
        }
        if let Some(vote) = s.vote {
            match vote.branch {
                VoteBranch::SetOne => c.set_one += 1,
                VoteBranch::SetZero => c.set_zero += 1,
                VoteBranch::Random => c.random += 1,
                VoteBranch::Keep => c.keep += 1,
            }
            c.hit_high += vote.hit_decide_high as u32;
            c.hit_low += vote.hit_decide_low as u32;
        }
    }
    c
}
