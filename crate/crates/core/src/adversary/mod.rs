//! Adversary strategies: a baseline, crash-style silencing, selective
//! eclipsing, a greedy coin biaser, and fully scripted omission patterns.

mod schedule;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use schedule::{CrashSchedule, ScheduleParseError};

use crate::error::ConfigError;
use crate::model::{
    AdversaryAction, AdversaryObservation, AdversaryStrategy, Bit, Hook, Omission, ProcessId, RunInfo,
};

/// Never corrupts anyone.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoAdversary;

impl<P> AdversaryStrategy<P> for NoAdversary {
    fn name(&self) -> String {
        "none".into()
    }

    fn after_local(&mut self, _obs: &AdversaryObservation<'_, P>) -> AdversaryAction {
        AdversaryAction::none()
    }
}

fn silence(p: ProcessId, omit: &mut Vec<Omission>) {
    omit.push(Omission::AllFrom(p));
    omit.push(Omission::AllTo(p));
}

/// Corrupts processes on a fixed schedule and drops every message to or from
/// them from their crash round on.
#[derive(Clone, Debug)]
pub struct CrashAdversary {
    schedule: CrashSchedule,
}

impl CrashAdversary {
    pub fn new(schedule: CrashSchedule, t: usize) -> Result<Self, ConfigError> {
        let scheduled = schedule.len();
        if scheduled > t {
            return Err(ConfigError::ScheduleExceedsBudget { scheduled, t });
        }
        Ok(Self { schedule })
    }
}

impl<P> AdversaryStrategy<P> for CrashAdversary {
    fn name(&self) -> String {
        "crash".into()
    }

    fn after_local(&mut self, obs: &AdversaryObservation<'_, P>) -> AdversaryAction {
        let corrupt = self.schedule.at(obs.round).to_vec();
        let mut omit = Vec::new();
        for p in obs.corrupted.iter().chain(corrupt.iter().copied()) {
            silence(p, &mut omit);
        }
        AdversaryAction { corrupt, omit }
    }
}

/// Corrupts `targets` in round 1. Each round, a target's message to `q` is
/// dropped when `(q.index() + round) % period == 0`, so with period 2 every
/// target reaches a rotating half of its recipients and period 1 silences it.
/// Incoming traffic is untouched.
#[derive(Clone, Debug)]
pub struct EclipseAdversary {
    targets: Vec<ProcessId>,
    period: u32,
}

impl EclipseAdversary {
    pub fn new(mut targets: Vec<ProcessId>, period: u32, t: usize) -> Result<Self, ConfigError> {
        targets.sort();
        targets.dedup();
        if targets.len() > t {
            return Err(ConfigError::ScheduleExceedsBudget {
                scheduled: targets.len(),
                t,
            });
        }
        if period == 0 {
            return Err(ConfigError::invalid("period", "must be at least 1"));
        }
        Ok(Self { targets, period })
    }
}

impl<P> AdversaryStrategy<P> for EclipseAdversary {
    fn name(&self) -> String {
        format!("eclipse(period={})", self.period)
    }

    fn after_local(&mut self, obs: &AdversaryObservation<'_, P>) -> AdversaryAction {
        let corrupt = if obs.round == 1 { self.targets.clone() } else { Vec::new() };
        let period = self.period as usize;
        let round = obs.round as usize;
        let mut omit = Vec::new();
        for &p in &self.targets {
            for i in obs.pending_from(p) {
                if (obs.pending[i].to.index() + round).is_multiple_of(period) {
                    omit.push(Omission::Message(i));
                }
            }
        }
        AdversaryAction { corrupt, omit }
    }
}

/// Greedy hiding adversary. At each vote round it sees the coins flipped in
/// that local phase and corrupts-and-silences, in id order, up to
/// `⌊budget_left / vote_rounds_left⌋` processes whose coin came up opposite
/// to `direction`. Everyone it has corrupted stays silenced.
#[derive(Clone, Debug)]
pub struct CoinBiaser {
    direction: Bit,
    vote_rounds: Vec<u32>,
}

impl CoinBiaser {
    pub fn new(direction: Bit) -> Self {
        Self {
            direction,
            vote_rounds: Vec::new(),
        }
    }
}

impl<P> AdversaryStrategy<P> for CoinBiaser {
    fn name(&self) -> String {
        format!("coin-biaser({})", self.direction.as_u8())
    }

    fn init(&mut self, info: &RunInfo<'_>) {
        self.vote_rounds = info.schedule.vote_rounds.clone();
    }

    fn after_local(&mut self, obs: &AdversaryObservation<'_, P>) -> AdversaryAction {
        let mut corrupt = Vec::new();
        let left = self.vote_rounds.iter().filter(|&&r| r >= obs.round).count();
        if left > 0 && self.vote_rounds.binary_search(&obs.round).is_ok() {
            let quota = obs.budget_left() / left;
            let mut opposed: Vec<ProcessId> = obs
                .draws
                .iter()
                .filter(|d| d.width == 1 && d.value != self.direction.as_u8() as u64)
                .map(|d| d.process)
                .filter(|p| !obs.corrupted.contains(*p))
                .collect();
            opposed.sort();
            opposed.dedup();
            corrupt.extend(opposed.into_iter().take(quota));
        }
        let mut omit = Vec::new();
        for p in obs.corrupted.iter().chain(corrupt.iter().copied()) {
            silence(p, &mut omit);
        }
        AdversaryAction { corrupt, omit }
    }
}

/// Replays a fixed list of actions, one per round, at the delivery hook.
#[derive(Clone, Debug, Default)]
pub struct ScriptedAdversary {
    actions: BTreeMap<u32, AdversaryAction>,
}

impl ScriptedAdversary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn at(mut self, round: u32, action: AdversaryAction) -> Self {
        self.actions.insert(round, action);
        self
    }
}

impl<P> AdversaryStrategy<P> for ScriptedAdversary {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn after_local(&mut self, _obs: &AdversaryObservation<'_, P>) -> AdversaryAction {
        AdversaryAction::none()
    }

    fn during_delivery(&mut self, obs: &AdversaryObservation<'_, P>) -> AdversaryAction {
        debug_assert_eq!(obs.hook, Hook::Delivery);
        self.actions.get(&obs.round).cloned().unwrap_or_default()
    }
}

/// Serializable description of a suite adversary, resolved against `(n, t)`
/// by [`AdversarySpec::build`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarySpec {
    None,
    /// Without an explicit schedule, crashes `t` processes spread evenly
    /// over the id range in round 1.
    Crash {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        schedule: Option<String>,
    },
    /// Without explicit targets, eclipses `⌊t/2⌋` processes spread evenly.
    Eclipse {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        targets: Option<Vec<u32>>,
        #[serde(default = "default_period")]
        period: u32,
    },
    CoinBiaser {
        #[serde(default = "default_direction")]
        direction: Bit,
    },
}

fn default_period() -> u32 {
    2
}

fn default_direction() -> Bit {
    Bit::One
}

/// `count` ids spread evenly over `1..=n`.
pub fn spread_ids(n: usize, count: usize) -> Vec<ProcessId> {
    (0..count)
        .map(|k| ProcessId::from_index(k * n / count.max(1)))
        .collect()
}

impl AdversarySpec {
    pub fn label(&self) -> &'static str {
        match self {
            AdversarySpec::None => "none",
            AdversarySpec::Crash { .. } => "crash",
            AdversarySpec::Eclipse { .. } => "eclipse",
            AdversarySpec::CoinBiaser { .. } => "coin-biaser",
        }
    }

    pub fn build<P: 'static>(&self, n: usize, t: usize) -> Result<Box<dyn AdversaryStrategy<P>>, ConfigError> {
        Ok(match self {
            AdversarySpec::None => Box::new(NoAdversary),
            AdversarySpec::Crash { schedule } => {
                let schedule = match schedule {
                    Some(text) => CrashSchedule::parse(text).map_err(|e| ConfigError::invalid("schedule", e.to_string()))?,
                    None => CrashSchedule::at_round(1, spread_ids(n, t)),
                };
                schedule.check_ids(n)?;
                Box::new(CrashAdversary::new(schedule, t)?)
            }
            AdversarySpec::Eclipse { targets, period } => {
                let targets = match targets {
                    Some(ids) => ids
                        .iter()
                        .map(|&i| {
                            if i == 0 || i as usize > n {
                                Err(ConfigError::invalid("targets", format!("id {i} outside 1..={n}")))
                            } else {
                                Ok(ProcessId::new(i))
                            }
                        })
                        .collect::<Result<_, _>>()?,
                    None => spread_ids(n, t / 2),
                };
                Box::new(EclipseAdversary::new(targets, *period, t)?)
            }
            AdversarySpec::CoinBiaser { direction } => Box::new(CoinBiaser::new(*direction)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_ids_are_distinct() {
        let ids = spread_ids(30, 7);
        let mut sorted = ids.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 7);
        assert!(ids.iter().all(|p| p.index() < 30));
    }

    #[test]
    fn crash_rejects_oversized_schedule() {
        let s = CrashSchedule::at_round(1, spread_ids(10, 3));
        assert!(matches!(
            CrashAdversary::new(s, 2),
            Err(ConfigError::ScheduleExceedsBudget { scheduled: 3, t: 2 })
        ));
    }

    #[test]
    fn spec_reads_from_toml() {
        let spec: AdversarySpec = toml::from_str("kind = \"eclipse\"\ntargets = [1, 4]").unwrap();
        assert_eq!(
            spec,
            AdversarySpec::Eclipse {
                targets: Some(vec![1, 4]),
                period: 2
            }
        );
    }
}
