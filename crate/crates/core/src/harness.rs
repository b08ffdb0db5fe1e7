//! Experiment plans, single runs and sweeps, and record emission.
//!
//! A plan is a TOML file:
//!
//! ```toml
//! seeds = 5             # runs per cell
//! base_seed = 0         # run seeds are base_seed..base_seed+seeds
//! workers = 2           # optional thread cap
//! inputs = { kind = "random", p_one = 0.5 }
//!
//! [grid]
//! protocol = ["main", "tradeoff"]
//! n = [64, 128]
//! t = [2]               # or leave out and set fault_divisor (t = n / divisor)
//! fault_divisor = 31
//! x = [1, 4]            # tradeoff only
//! adversary = [{ kind = "none" }, { kind = "crash" }]
//!
//! [constants]
//! degree_coefficient = 6.0
//! spread_coefficient = 8
//! flood_coefficient = 2
//! epoch_coefficient = { num = 1, den = 1 }
//! ```

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversarySpec;
use crate::consensus::{Fraction, MainParams, MainProtocol, ThresholdConfig, DESK_DEGREE_COEFFICIENT};
use crate::error::{ConfigError, EngineError};
use crate::exec::{self, ExecMode};
use crate::fallback::FallbackProtocol;
use crate::model::{derive_seed, run_execution, Bit, Execution, Metrics, SystemConfig, TraceLevel};
use crate::tradeoff::{TradeoffParams, TradeoffProtocol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Main,
    Tradeoff,
    Fallback,
}

impl ProtocolKind {
    pub fn label(self) -> &'static str {
        match self {
            ProtocolKind::Main => "main",
            ProtocolKind::Tradeoff => "tradeoff",
            ProtocolKind::Fallback => "fallback",
        }
    }
}

/// How run inputs are chosen. Inputs are a function of the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputPattern {
    Random {
        #[serde(default = "half")]
        p_one: f64,
    },
    Zeros,
    Ones,
    /// Ones spread evenly at the given percentage.
    Interleaved { ones_percent: u32 },
    /// Varies with `seed % 10`: all zeros, all ones, two interleaved 55%
    /// patterns, then random.
    Mixed,
    /// One `0`/`1` character per process.
    Explicit { bits: String },
}

fn half() -> f64 {
    0.5
}

impl Default for InputPattern {
    fn default() -> Self {
        InputPattern::Random { p_one: 0.5 }
    }
}

const INPUT_SALT: u64 = 0x1a9d_7e11;

impl InputPattern {
    pub fn generate(&self, n: usize, seed: u64) -> Result<Vec<Bit>, ConfigError> {
        Ok(match self {
            InputPattern::Random { p_one } => {
                if !(0.0..=1.0).contains(p_one) {
                    return Err(ConfigError::invalid("p_one", "must lie in [0, 1]"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INPUT_SALT));
                (0..n).map(|_| Bit::from_bool(rng.random_bool(*p_one))).collect()
            }
            InputPattern::Zeros => vec![Bit::Zero; n],
            InputPattern::Ones => vec![Bit::One; n],
            InputPattern::Interleaved { ones_percent } => {
                let p = (*ones_percent).min(100) as usize;
                (0..n).map(|i| Bit::from_bool((i + 1) * p / 100 > i * p / 100)).collect()
            }
            InputPattern::Mixed => match seed % 10 {
                0 => vec![Bit::Zero; n],
                1 => vec![Bit::One; n],
                2 | 3 => InputPattern::Interleaved { ones_percent: 55 }.generate(n, seed)?,
                _ => InputPattern::default().generate(n, seed)?,
            },
            InputPattern::Explicit { bits } => {
                let parsed: Vec<Bit> = bits
                    .chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| match c {
                        '0' => Ok(Bit::Zero),
                        '1' => Ok(Bit::One),
                        other => Err(ConfigError::invalid("bits", format!("unexpected character {other:?}"))),
                    })
                    .collect::<Result<_, _>>()?;
                if parsed.len() != n {
                    return Err(ConfigError::InputLength {
                        expected: n,
                        got: parsed.len(),
                    });
                }
                parsed
            }
        })
    }
}

/// Named protocol constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub degree_coefficient: f64,
    pub epoch_coefficient: Fraction,
    pub spread_coefficient: u32,
    pub flood_coefficient: u32,
    pub thresholds: ThresholdConfig,
    pub graph_seed: u64,
}

impl Default for Constants {
    fn default() -> Self {
        let main = MainParams::default();
        Self {
            degree_coefficient: DESK_DEGREE_COEFFICIENT,
            epoch_coefficient: main.epoch_coefficient,
            spread_coefficient: main.spread_coefficient,
            flood_coefficient: TradeoffParams::default().flood_coefficient,
            thresholds: main.thresholds,
            graph_seed: main.graph_seed,
        }
    }
}

impl Constants {
    pub fn main_params(&self) -> MainParams {
        MainParams {
            degree_coefficient: self.degree_coefficient,
            epoch_coefficient: self.epoch_coefficient,
            spread_coefficient: self.spread_coefficient,
            thresholds: self.thresholds,
            graph_seed: self.graph_seed,
            force_undecided: false,
        }
    }
}

/// One parameter combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub inputs: InputPattern,
    #[serde(default)]
    pub constants: Constants,
}

impl CellSpec {
    pub fn label(&self) -> String {
        let mut s = format!("{} n={} t={}", self.protocol.label(), self.n, self.t);
        if let Some(x) = self.x {
            let _ = write!(s, " x={x}");
        }
        let _ = write!(s, " adv={}", self.adversary.label());
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub protocol: Vec<ProtocolKind>,
    pub n: Vec<usize>,
    #[serde(default)]
    pub t: Vec<usize>,
    #[serde(default)]
    pub fault_divisor: Option<usize>,
    #[serde(default)]
    pub x: Vec<usize>,
    pub adversary: Vec<AdversarySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub seeds: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub inputs: InputPattern,
    pub grid: Grid,
    #[serde(default)]
    pub constants: Constants,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("plan: {0}")]
    Invalid(String),
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self, PlanError> {
        let plan: ExperimentPlan = toml::from_str(text)?;
        if plan.grid.t.is_empty() && plan.grid.fault_divisor.is_none() {
            return Err(PlanError::Invalid("grid needs `t` or `fault_divisor`".into()));
        }
        if plan.grid.fault_divisor == Some(0) {
            return Err(PlanError::Invalid("fault_divisor must be positive".into()));
        }
        Ok(plan)
    }

    /// Cells in grid order: protocol, n, t, x, adversary.
    pub fn cells(&self) -> Vec<CellSpec> {
        let g = &self.grid;
        let mut cells = Vec::new();
        for &protocol in &g.protocol {
            for &n in &g.n {
                let ts = if g.t.is_empty() {
                    vec![n / g.fault_divisor.unwrap_or(1).max(1)]
                } else {
                    g.t.clone()
                };
                for &t in &ts {
                    let xs: Vec<Option<usize>> = match protocol {
                        ProtocolKind::Tradeoff if !g.x.is_empty() => g.x.iter().map(|x| Some(*x)).collect(),
                        ProtocolKind::Tradeoff => vec![Some(1)],
                        _ => vec![None],
                    };
                    for x in xs {
                        for adversary in &g.adversary {
                            cells.push(CellSpec {
                                protocol,
                                n,
                                t,
                                x,
                                adversary: adversary.clone(),
                                inputs: self.inputs.clone(),
                                constants: self.constants,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

/// Consensus conditions and model legality for one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeChecks {
    /// All non-faulty decisions are equal.
    pub agreement: bool,
    /// Unanimous inputs are the only possible decision.
    pub validity: bool,
    /// Every non-faulty process decided.
    pub termination: bool,
    /// The trace replays without model violations.
    pub legal: bool,
    /// Metrics recompute from the trace.
    pub accounting: bool,
}

impl OutcomeChecks {
    pub fn evaluate(inputs: &[Bit], ex: &Execution) -> Self {
        let nonfaulty: Vec<_> = ex
            .decisions
            .iter()
            .enumerate()
            .filter(|(i, _)| !ex.trace.is_faulty(crate::model::ProcessId::from_index(*i)))
            .map(|(_, d)| *d)
            .collect();
        let values: Vec<Bit> = nonfaulty.iter().flatten().map(|d| d.value).collect();
        let agreement = values.windows(2).all(|w| w[0] == w[1]);
        let unanimous = inputs.windows(2).all(|w| w[0] == w[1]).then(|| inputs.first().copied()).flatten();
        let validity = unanimous.is_none_or(|v| ex.decisions.iter().flatten().all(|d| d.value == v));
        let termination = nonfaulty.iter().all(Option::is_some);
        let t = &ex.trace;
        let m = &ex.metrics;
        let accesses: u64 = t.rounds.iter().map(|r| r.draws.len() as u64).sum();
        let rbits: u64 = t.rounds.iter().flat_map(|r| &r.draws).map(|d| d.width as u64).sum();
        let accounting = m.rounds == t.len()
            && m.comm_bits == t.rounds.iter().map(|r| r.bits_sent).sum::<u64>()
            && m.random_accesses == accesses
            && m.random_bits == rbits
            && ex.ledger.per_round_accesses.iter().map(|r| *r as u64).sum::<u64>() == accesses;
        Self {
            agreement,
            validity,
            termination,
            legal: t.verify().is_ok(),
            accounting,
        }
    }

    pub fn all_hold(&self) -> bool {
        self.agreement && self.validity && self.termination && self.legal && self.accounting
    }
}

/// The randomness lower-bound inequality `(T − 1)·(R + T) ≥ t²/(1024·log₂ n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub holds: bool,
    pub product: u128,
    pub bound: f64,
    /// `product − bound`.
    pub margin: f64,
}

pub fn check_lower_bound_product(metrics: &Metrics, n: usize, t: usize) -> LowerBoundCheck {
    let rounds = metrics.rounds as u128;
    let product = rounds.saturating_sub(1) * (metrics.random_accesses as u128 + rounds);
    let bound = (t * t) as f64 / (1024.0 * (n.max(2) as f64).log2());
    LowerBoundCheck {
        holds: product as f64 >= bound,
        product,
        bound,
        margin: product as f64 - bound,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ConfigError,
    EngineError,
}

/// One line of output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: String,
    pub protocol: ProtocolKind,
    pub n: usize,
    pub t: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
    pub adversary: String,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub input_ones: usize,
    /// Per-process decision, `None` if undecided.
    pub decisions: Vec<Option<Bit>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<OutcomeChecks>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<LowerBoundCheck>,
    /// Smallest operative count at a scheduled epoch end.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_epoch_operative: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_rounds: Option<u32>,
    /// Rounds reserved for each inner run (tradeoff only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_budget: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

impl RunRecord {
    /// A completed run broke agreement, validity, termination or legality,
    /// or the engine stopped on something other than bad configuration.
    pub fn violation(&self) -> bool {
        match self.status {
            RunStatus::Ok => !self.checks.is_some_and(|c| c.all_hold()),
            RunStatus::ConfigError => false,
            RunStatus::EngineError => true,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

struct ProtocolFacts {
    closed_form_rounds: u32,
    phase_budget: Option<u32>,
}

fn execute(cell: &CellSpec, seed: u64, inputs: &[Bit]) -> Result<(Execution, ProtocolFacts), EngineError> {
    let (n, t) = (cell.n, cell.t);
    let config = SystemConfig::new(n, t, seed)?;
    let mut adversary = cell.adversary.build(n, t)?;
    let level = TraceLevel::Summary;
    match cell.protocol {
        ProtocolKind::Main => {
            let p = MainProtocol::new(n, t, cell.constants.main_params())?;
            let ex = run_execution(&config, inputs, &p, adversary.as_mut(), level)?;
            let facts = ProtocolFacts {
                closed_form_rounds: p.closed_form_rounds(),
                phase_budget: None,
            };
            Ok((ex, facts))
        }
        ProtocolKind::Tradeoff => {
            let params = TradeoffParams {
                x: cell.x.unwrap_or(1),
                inner: cell.constants.main_params(),
                flood_coefficient: cell.constants.flood_coefficient,
                force_mixed: false,
            };
            let p = TradeoffProtocol::new(n, t, params)?;
            let ex = run_execution(&config, inputs, &p, adversary.as_mut(), level)?;
            let facts = ProtocolFacts {
                closed_form_rounds: p.closed_form_rounds(),
                phase_budget: Some(p.phase_budget()),
            };
            Ok((ex, facts))
        }
        ProtocolKind::Fallback => {
            let p = FallbackProtocol::new(n, t)?;
            let ex = run_execution(&config, inputs, &p, adversary.as_mut(), level)?;
            let facts = ProtocolFacts {
                closed_form_rounds: t as u32 + 2,
                phase_budget: None,
            };
            Ok((ex, facts))
        }
    }
}

/// Runs one cell at one seed. Never fails: errors land in the record.
pub fn run_cell(cell: &CellSpec, seed: u64) -> RunRecord {
    let mut record = RunRecord {
        cell: cell.label(),
        protocol: cell.protocol,
        n: cell.n,
        t: cell.t,
        x: cell.x,
        adversary: cell.adversary.label().to_string(),
        seed,
        status: RunStatus::Ok,
        error: None,
        input_ones: 0,
        decisions: Vec::new(),
        metrics: None,
        checks: None,
        lower_bound: None,
        min_epoch_operative: None,
        closed_form_rounds: None,
        phase_budget: None,
        digest: None,
    };
    let inputs = match cell.inputs.generate(cell.n, seed) {
        Ok(inputs) => inputs,
        Err(e) => {
            record.status = RunStatus::ConfigError;
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.input_ones = inputs.iter().filter(|b| **b == Bit::One).count();
    match execute(cell, seed, &inputs) {
        Ok((ex, facts)) => {
            record.decisions = ex.decisions.iter().map(|d| d.map(|d| d.value)).collect();
            record.checks = Some(OutcomeChecks::evaluate(&inputs, &ex));
            record.lower_bound = Some(check_lower_bound_product(&ex.metrics, cell.n, cell.t));
            record.min_epoch_operative = ex
                .trace
                .checkpoints
                .iter()
                .filter(|c| c.scheduled)
                .map(|c| c.operative)
                .min();
            record.closed_form_rounds = Some(facts.closed_form_rounds);
            record.phase_budget = facts.phase_budget;
            record.digest = Some(format!("{:016x}", ex.trace.digest()));
            record.metrics = Some(ex.metrics);
        }
        Err(EngineError::Config(e)) => {
            record.status = RunStatus::ConfigError;
            record.error = Some(e.to_string());
        }
        Err(e) => {
            record.status = RunStatus::EngineError;
            record.error = Some(e.to_string());
        }
    }
    record
}

/// Records of a sweep, in (cell, seed) order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub records: Vec<RunRecord>,
}

pub fn run_sweep(plan: &ExperimentPlan, mode: ExecMode) -> SweepResult {
    let cells = plan.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..plan.seeds).map(move |s| (c, plan.base_seed + s)))
        .collect();
    let records = exec::with_workers(plan.workers, || {
        exec::map(mode, &jobs, |(c, seed)| run_cell(&cells[*c], *seed))
    });
    SweepResult { records }
}

impl SweepResult {
    pub fn violations(&self) -> usize {
        self.records.iter().filter(|r| r.violation()).count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json());
            out.push('\n');
        }
        out
    }

    /// One summary row per cell: counts plus mean and max of rounds,
    /// communication bits and random accesses over successful runs.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for group in self.records.chunk_by(|a, b| a.cell == b.cell) {
            let ok: Vec<&Metrics> = group.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let stat = |f: fn(&Metrics) -> u64| {
                let max = ok.iter().map(|m| f(m)).max().unwrap_or(0);
                let mean = if ok.is_empty() {
                    0.0
                } else {
                    ok.iter().map(|m| f(m) as f64).sum::<f64>() / ok.len() as f64
                };
                (mean, max)
            };
            let (mean_rounds, max_rounds) = stat(|m| m.rounds as u64);
            let (mean_comm_bits, max_comm_bits) = stat(|m| m.comm_bits);
            let (mean_random, max_random) = stat(|m| m.random_accesses);
            let first = &group[0];
            let row = CellSummary {
                cell: &first.cell,
                protocol: first.protocol.label(),
                n: first.n,
                t: first.t,
                x: first.x,
                adversary: &first.adversary,
                runs: group.len(),
                errors: group.iter().filter(|r| r.status != RunStatus::Ok).count(),
                violations: group.iter().filter(|r| r.violation()).count(),
                mean_rounds,
                max_rounds,
                mean_comm_bits,
                max_comm_bits,
                mean_random,
                max_random,
            };
            w.serialize(row).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
    }
}

/// One CSV row: per-cell run counts and mean/max of the main metrics.
#[derive(Serialize)]
struct CellSummary<'a> {
    cell: &'a str,
    protocol: &'static str,
    n: usize,
    t: usize,
    x: Option<usize>,
    adversary: &'a str,
    runs: usize,
    errors: usize,
    violations: usize,
    mean_rounds: f64,
    max_rounds: u64,
    mean_comm_bits: f64,
    max_comm_bits: u64,
    mean_random: f64,
    max_random: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(rounds: u32, random: u64) -> Metrics {
        Metrics {
            rounds,
            messages: 0,
            comm_bits: 0,
            random_accesses: random,
            random_bits: random,
            random_by_round: Vec::new(),
            omitted_messages: 0,
            corruptions: 0,
            segments: Vec::new(),
            fallback_triggered: false,
        }
    }

    #[test]
    fn lower_bound_examples() {
        assert!(check_lower_bound_product(&metrics(1, 0), 256, 0).holds);
        assert!(!check_lower_bound_product(&metrics(1, 0), 256, 8).holds);
        let c = check_lower_bound_product(&metrics(300, 500), 256, 8);
        assert!(c.holds && c.margin > 1e5);
    }

    #[test]
    fn interleaved_inputs_hit_the_percentage() {
        let bits = InputPattern::Interleaved { ones_percent: 55 }.generate(100, 0).unwrap();
        assert_eq!(bits.iter().filter(|b| **b == Bit::One).count(), 55);
    }

    #[test]
    fn explicit_inputs_must_match_n() {
        let p = InputPattern::Explicit { bits: "0101".into() };
        assert!(p.generate(4, 0).is_ok());
        assert!(matches!(p.generate(5, 0), Err(ConfigError::InputLength { .. })));
    }

    #[test]
    fn plan_needs_a_fault_rule() {
        let text = "seeds = 1\n[grid]\nprotocol = [\"main\"]\nn = [30]\nadversary = [{ kind = \"none\" }]\n";
        assert!(matches!(ExperimentPlan::from_toml(text), Err(PlanError::Invalid(_))));
    }

    #[test]
    fn grid_expands_x_for_tradeoff_only() {
        let text = r#"
            seeds = 1
            [grid]
            protocol = ["main", "tradeoff"]
            n = [64]
            fault_divisor = 64
            x = [1, 4]
            adversary = [{ kind = "none" }, { kind = "crash" }]
        "#;
        let cells = ExperimentPlan::from_toml(text).unwrap().cells();
        assert_eq!(cells.len(), 2 + 4);
        assert!(cells.iter().all(|c| c.t == 1));
    }
}
