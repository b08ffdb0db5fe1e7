use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use omcon_core::adversary::AdversarySpec;
use omcon_core::coin_game::{
    anti_concentration_check, bias_report, BudgetRule, BuiltinOutcome, CoinGame, LogBase, DEFAULT_MAX_PLAYERS,
};
use omcon_core::consensus::Fraction;
use omcon_core::exec::ExecMode;
use omcon_core::harness::{run_cell, run_sweep, CellSpec, Constants, ExperimentPlan, InputPattern, ProtocolKind, RunStatus, SweepResult};
use omcon_core::model::Bit;
use omcon_core::overlay::{property_report, CheckMode, GraphConfig, OverlayGraph, ReportRequest};

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "omcon", version, about = "Omission-fault consensus simulator")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// One execution.
    Run(RunArgs),
    /// Every cell of a TOML plan.
    Sweep {
        plan: PathBuf,
        /// Run cells one at a time.
        #[arg(long)]
        sequential: bool,
    },
    /// Property checks on a generated or loaded overlay graph.
    GraphCheck(GraphArgs),
    /// Coin-flipping game oracles.
    #[command(subcommand)]
    CoinGame(CoinCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Main,
    Tradeoff,
    Fallback,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryArg {
    None,
    Crash,
    Eclipse,
    CoinBiaser,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = ProtocolArg::Main)]
    protocol: ProtocolArg,
    #[arg(long)]
    n: usize,
    /// Defaults to the largest budget the protocol accepts.
    #[arg(long)]
    t: Option<usize>,
    /// Super-process count (tradeoff).
    #[arg(long, default_value_t = 1)]
    x: usize,
    #[arg(long, value_enum, default_value_t = AdversaryArg::None)]
    adversary: AdversaryArg,
    /// Crash schedule, e.g. "1: 3, 7; 5: 9" with lines separated by ';'.
    #[arg(long)]
    crash_schedule: Option<String>,
    /// Eclipse targets (1-based ids).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<u32>>,
    #[arg(long, default_value_t = 2)]
    period: u32,
    /// Coin-biaser direction.
    #[arg(long, default_value_t = 1)]
    direction: u8,
    /// random[:p], zeros, ones, mixed, interleaved:<percent> or bits:<01...>.
    #[arg(long, default_value = "random")]
    inputs: String,
    #[arg(long)]
    degree_coefficient: Option<f64>,
    /// As `num/den`.
    #[arg(long)]
    epoch_coefficient: Option<String>,
    #[arg(long)]
    spread_coefficient: Option<u32>,
    #[arg(long)]
    flood_coefficient: Option<u32>,
    #[arg(long)]
    graph_seed: Option<u64>,
}

#[derive(Args)]
struct GraphArgs {
    /// Generate `G(n, Δ/(n−1))` with this many vertices.
    #[arg(long, required_unless_present = "graph")]
    n: Option<usize>,
    /// Δ coefficient for generation and the thresholds.
    #[arg(long, default_value_t = 6.0)]
    coefficient: f64,
    /// Adjacency-list file instead of generating.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Δ for the thresholds when loading a file.
    #[arg(long)]
    delta: Option<usize>,
    /// Sample this many cases instead of exact enumeration.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum CoinCommand {
    /// Exact bias analysis over all outcomes of k fair bits.
    Bias {
        #[arg(long)]
        k: usize,
        /// majority, parity or threshold:<c>.
        #[arg(long, default_value = "majority")]
        outcome: String,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        #[arg(long, default_value_t = 8.0)]
        coefficient: f64,
        #[arg(long)]
        log2: bool,
        /// Leave the per-outcome hiding table out of the report.
        #[arg(long)]
        brief: bool,
    },
    /// Monte-Carlo estimate of the upper tail of a fair binomial.
    AntiConcentration {
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

fn config(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Run(args) => {
            let cell = cell_from_args(args)?;
            let record = run_cell(&cell, seed);
            if record.status == RunStatus::ConfigError {
                return Err(config(record.error.unwrap_or_default()));
            }
            let result = SweepResult { records: vec![record] };
            emit_records(cli, &result)
        }
        Command::Sweep { plan, sequential } => {
            let text = fs::read_to_string(plan).with_context(|| format!("reading {}", plan.display()))?;
            let mut plan = ExperimentPlan::from_toml(&text).map_err(config)?;
            if let Some(s) = cli.seed {
                plan.base_seed = s;
            }
            let mode = if *sequential { ExecMode::Sequential } else { ExecMode::Parallel };
            let result = run_sweep(&plan, mode);
            emit_records(cli, &result)
        }
        Command::GraphCheck(args) => {
            let (graph, delta) = match &args.graph {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    let g = OverlayGraph::from_adjacency_text(&text).map_err(config)?;
                    let delta = args.delta.unwrap_or_else(|| g.degree_range().0);
                    (g, delta)
                }
                None => {
                    let n = args.n.expect("clap enforces --n without --graph");
                    if n == 0 {
                        return Err(config("n must be positive"));
                    }
                    let gc = GraphConfig::from_coefficient(n, args.coefficient, seed);
                    (OverlayGraph::generate(&gc), gc.delta)
                }
            };
            let mode = args.trials.map_or(CheckMode::exact(), |t| CheckMode::sampled(t, seed));
            let report = property_report(&graph, &ReportRequest::standard(graph.n(), delta, mode));
            emit_json(cli, &report)?;
            Ok(0)
        }
        Command::CoinGame(CoinCommand::Bias {
            k,
            outcome,
            alpha,
            coefficient,
            log2,
            brief,
        }) => {
            if *k > DEFAULT_MAX_PLAYERS {
                return Err(config(format!("k={k} exceeds {DEFAULT_MAX_PLAYERS}")));
            }
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(config("alpha must lie in (0, 1)"));
            }
            let f = parse_outcome(outcome)?;
            let game = CoinGame::uniform_bits(*k, f.into_fn());
            let rule = BudgetRule {
                coefficient: *coefficient,
                log_base: if *log2 { LogBase::Two } else { LogBase::Natural },
            };
            let mut report = bias_report(&game, *alpha, rule, 1 << DEFAULT_MAX_PLAYERS).map_err(config)?;
            if *brief {
                report.min_hiding.clear();
            }
            emit_json(cli, &report)?;
            Ok(0)
        }
        Command::CoinGame(CoinCommand::AntiConcentration { n, tau, trials }) => {
            let r = anti_concentration_check(*n, *tau, *trials, seed, ExecMode::Parallel).map_err(config)?;
            emit_json(cli, &r)?;
            Ok(0)
        }
    }
}

fn parse_outcome(s: &str) -> Result<BuiltinOutcome, Failure> {
    match s.split_once(':') {
        None if s == "majority" => Ok(BuiltinOutcome::MajorityTiesZero),
        None if s == "parity" => Ok(BuiltinOutcome::Parity),
        Some(("threshold", c)) => c
            .parse()
            .map(|c| BuiltinOutcome::Threshold { c })
            .map_err(|_| config(format!("bad threshold {c:?}"))),
        _ => Err(config(format!("unknown outcome function {s:?}"))),
    }
}

fn parse_inputs(s: &str) -> Result<InputPattern, Failure> {
    let (kind, arg) = s.split_once(':').map_or((s, None), |(k, a)| (k, Some(a)));
    let number = |a: Option<&str>| -> Result<Option<f64>, Failure> {
        a.map(|a| a.parse::<f64>().map_err(|_| config(format!("bad number {a:?}"))))
            .transpose()
    };
    Ok(match kind {
        "random" => InputPattern::Random {
            p_one: number(arg)?.unwrap_or(0.5),
        },
        "zeros" => InputPattern::Zeros,
        "ones" => InputPattern::Ones,
        "mixed" => InputPattern::Mixed,
        "interleaved" => InputPattern::Interleaved {
            ones_percent: number(arg)?.unwrap_or(50.0) as u32,
        },
        "bits" => InputPattern::Explicit {
            bits: arg.unwrap_or_default().to_string(),
        },
        _ => return Err(config(format!("unknown input pattern {s:?}"))),
    })
}

fn cell_from_args(a: &RunArgs) -> Result<CellSpec, Failure> {
    let protocol = match a.protocol {
        ProtocolArg::Main => ProtocolKind::Main,
        ProtocolArg::Tradeoff => ProtocolKind::Tradeoff,
        ProtocolArg::Fallback => ProtocolKind::Fallback,
    };
    let t = a.t.unwrap_or(match protocol {
        ProtocolKind::Main => a.n.saturating_sub(1) / 30,
        ProtocolKind::Tradeoff => a.n.saturating_sub(1) / 60,
        ProtocolKind::Fallback => a.n.saturating_sub(1),
    });
    let adversary = match a.adversary {
        AdversaryArg::None => AdversarySpec::None,
        AdversaryArg::Crash => AdversarySpec::Crash {
            schedule: a.crash_schedule.as_ref().map(|s| s.replace(';', "\n")),
        },
        AdversaryArg::Eclipse => AdversarySpec::Eclipse {
            targets: a.targets.clone(),
            period: a.period,
        },
        AdversaryArg::CoinBiaser => AdversarySpec::CoinBiaser {
            direction: Bit::try_from(a.direction).map_err(config)?,
        },
    };
    let mut constants = Constants::default();
    if let Some(c) = a.degree_coefficient {
        constants.degree_coefficient = c;
    }
    if let Some(text) = &a.epoch_coefficient {
        let (num, den) = text.split_once('/').unwrap_or((text, "1"));
        let parse = |s: &str| s.trim().parse::<u64>().map_err(|_| config(format!("bad epoch coefficient {text:?}")));
        let (num, den) = (parse(num)?, parse(den)?);
        if den == 0 {
            return Err(config("epoch coefficient denominator is zero"));
        }
        constants.epoch_coefficient = Fraction::new(num, den);
    }
    if let Some(c) = a.spread_coefficient {
        constants.spread_coefficient = c;
    }
    if let Some(c) = a.flood_coefficient {
        constants.flood_coefficient = c;
    }
    if let Some(s) = a.graph_seed {
        constants.graph_seed = s;
    }
    Ok(CellSpec {
        protocol,
        n: a.n,
        t,
        x: (protocol == ProtocolKind::Tradeoff).then_some(a.x),
        adversary,
        inputs: parse_inputs(&a.inputs)?,
        constants,
    })
}

fn write_output(cli: &Cli, text: &str) -> anyhow::Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn emit_records(cli: &Cli, result: &SweepResult) -> Result<u8, Failure> {
    let text = match cli.format {
        Format::Jsonl => result.to_jsonl(),
        Format::Csv => result.to_csv(),
    };
    write_output(cli, &text)?;
    let violations = result.violations();
    if violations > 0 {
        eprintln!("{violations} run(s) violated an invariant");
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn emit_json<T: serde::Serialize>(cli: &Cli, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    text.push('\n');
    write_output(cli, &text)?;
    Ok(())
}
