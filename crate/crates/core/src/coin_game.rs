//! The one-round coin-flipping game: players draw values, an adversary hides
//! some of them, and an outcome function maps what is left to a bit.
//!
//! Oracles here answer how many hidings force a chosen outcome, exactly by
//! subset enumeration or over sampled draws.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, ExecMode};
use crate::model::{derive_seed, Bit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoinGameError {
    #[error("enumeration needs {needed} cases, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("value sequence has {got} entries, game has {expected} players")]
    SequenceLength { expected: usize, got: usize },
    #[error("tau={tau} exceeds sqrt(n)/8 = {limit} for n={n}")]
    TauOutOfRange { n: u64, tau: f64, limit: f64 },
}

/// A finite distribution over values `0..len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueDistribution {
    probs: Vec<Ratio<u64>>,
}

impl ValueDistribution {
    pub fn new(probs: Vec<Ratio<u64>>) -> Result<Self, CoinGameError> {
        if probs.is_empty() {
            return Err(CoinGameError::InvalidDistribution("empty domain".into()));
        }
        let total = probs.iter().fold(BigRational::zero(), |acc, p| acc + big(*p));
        if !total.is_one() {
            return Err(CoinGameError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn fair_bit() -> Self {
        Self {
            probs: vec![Ratio::new(1, 2); 2],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, value: u32) -> Ratio<u64> {
        self.probs[value as usize]
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (v, p) in self.probs.iter().enumerate() {
            acc += *p.numer() as f64 / *p.denom() as f64;
            if u < acc {
                return v as u32;
            }
        }
        self.probs.len() as u32 - 1
    }
}

fn big(p: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom()))
}

/// Built-in outcome functions. `None` entries are hidden players.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BuiltinOutcome {
    /// 1 iff visible nonzero values outnumber visible zeros.
    MajorityTiesZero,
    /// Parity of the sum of visible values.
    Parity,
    /// 1 iff at least `c` visible values are nonzero.
    Threshold { c: usize },
}

impl BuiltinOutcome {
    pub fn eval(self, values: &[Option<u32>]) -> Bit {
        match self {
            BuiltinOutcome::MajorityTiesZero => {
                let ones = values.iter().filter(|v| matches!(v, Some(x) if *x != 0)).count();
                let zeros = values.iter().filter(|v| **v == Some(0)).count();
                Bit::from_bool(ones > zeros)
            }
            BuiltinOutcome::Parity => {
                Bit::from_bool(values.iter().flatten().fold(0u32, |acc, v| acc ^ (v & 1)) == 1)
            }
            BuiltinOutcome::Threshold { c } => {
                Bit::from_bool(values.iter().filter(|v| matches!(v, Some(x) if *x != 0)).count() >= c)
            }
        }
    }

    pub fn into_fn(self) -> OutcomeFn {
        Arc::new(move |values| self.eval(values))
    }
}

pub type OutcomeFn = Arc<dyn Fn(&[Option<u32>]) -> Bit + Send + Sync>;

#[derive(Clone)]
pub struct CoinGame {
    domains: Vec<ValueDistribution>,
    outcome: OutcomeFn,
}

impl fmt::Debug for CoinGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoinGame").field("domains", &self.domains).finish_non_exhaustive()
    }
}

impl CoinGame {
    pub fn new(domains: Vec<ValueDistribution>, outcome: OutcomeFn) -> Self {
        Self { domains, outcome }
    }

    /// `k` fair bits.
    pub fn uniform_bits(k: usize, outcome: OutcomeFn) -> Self {
        Self::new(vec![ValueDistribution::fair_bit(); k], outcome)
    }

    pub fn players(&self) -> usize {
        self.domains.len()
    }

    pub fn outcome(&self, values: &[Option<u32>]) -> Bit {
        (self.outcome)(values)
    }

    fn outcome_with_hidden(&self, y: &[u32], hidden: &[usize]) -> Bit {
        let mut view: Vec<Option<u32>> = y.iter().copied().map(Some).collect();
        for &h in hidden {
            view[h] = None;
        }
        self.outcome(&view)
    }

    /// Number of value sequences in the product space.
    pub fn outcome_space(&self) -> u128 {
        self.domains
            .iter()
            .try_fold(1u128, |acc, d| acc.checked_mul(d.len() as u128))
            .unwrap_or(u128::MAX)
    }
}

/// Result of a minimum-hiding search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hiding {
    /// Smallest hidden set, first in lexicographic order among those of its size.
    Witness(Vec<usize>),
    Unbiasable,
}

impl Hiding {
    pub fn size(&self) -> Option<usize> {
        match self {
            Hiding::Witness(h) => Some(h.len()),
            Hiding::Unbiasable => None,
        }
    }
}

/// Largest player count for subset enumeration.
pub const DEFAULT_MAX_PLAYERS: usize = 20;

/// Smallest set of players whose hiding makes the outcome `v`.
pub fn min_hiding(game: &CoinGame, y: &[u32], v: Bit) -> Result<Hiding, CoinGameError> {
    min_hiding_within(game, y, v, game.players(), DEFAULT_MAX_PLAYERS)
}

/// Like [`min_hiding`], but gives up (reporting `Unbiasable`) beyond
/// `limit` hidden players.
pub fn min_hiding_within(
    game: &CoinGame,
    y: &[u32],
    v: Bit,
    limit: usize,
    max_players: usize,
) -> Result<Hiding, CoinGameError> {
    let k = game.players();
    if y.len() != k {
        return Err(CoinGameError::SequenceLength { expected: k, got: y.len() });
    }
    if k > max_players {
        return Err(CoinGameError::BudgetExceeded {
            needed: 1u128 << k.min(127),
            budget: 1u128 << max_players.min(127),
        });
    }
    for size in 0..=limit.min(k) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            if game.outcome_with_hidden(y, &subset) == v {
                return Ok(Hiding::Witness(subset));
            }
            if !next_combination(&mut subset, k) {
                break;
            }
        }
    }
    Ok(Hiding::Unbiasable)
}

/// Advances `c` to the next `c.len()`-subset of `0..k` in lexicographic order.
fn next_combination(c: &mut [usize], k: usize) -> bool {
    let m = c.len();
    let Some(i) = (0..m).rev().find(|&i| c[i] < k - m + i) else {
        return false;
    };
    c[i] += 1;
    for j in i + 1..m {
        c[j] = c[j - 1] + 1;
    }
    true
}

/// Logarithm used in the hiding budget.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetRule {
    pub coefficient: f64,
    pub log_base: LogBase,
}

impl Default for BudgetRule {
    fn default() -> Self {
        Self {
            coefficient: 8.0,
            log_base: LogBase::Natural,
        }
    }
}

impl BudgetRule {
    /// `⌈c·√(k·log(1/α))⌉`.
    pub fn budget(&self, k: usize, alpha: f64) -> usize {
        let log = match self.log_base {
            LogBase::Natural => (1.0 / alpha).ln(),
            LogBase::Two => (1.0 / alpha).log2(),
        };
        (self.coefficient * (k as f64 * log).sqrt()).ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbabilityMode {
    /// Enumerate the product space, up to `budget` sequences.
    Exact { budget: u128 },
    MonteCarlo { trials: u64, seed: u64 },
}

impl ProbabilityMode {
    pub fn exact() -> Self {
        ProbabilityMode::Exact { budget: 1 << 20 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Probability {
    Exact(BigRational),
    Estimate { value: f64, trials: u64 },
}

impl Probability {
    pub fn as_f64(&self) -> f64 {
        match self {
            Probability::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Probability::Estimate { value, .. } => *value,
        }
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probability::Exact(r) => write!(f, "{r}"),
            Probability::Estimate { value, trials } => write!(f, "{value} ({trials} trials)"),
        }
    }
}

/// Decodes sequence number `index` of the product space, first player
/// varying fastest.
fn sequence_at(game: &CoinGame, mut index: u128) -> Vec<u32> {
    game.domains
        .iter()
        .map(|d| {
            let v = (index % d.len() as u128) as u32;
            index /= d.len() as u128;
            v
        })
        .collect()
}

fn sequence_prob(game: &CoinGame, y: &[u32]) -> BigRational {
    game.domains
        .iter()
        .zip(y)
        .fold(BigRational::one(), |acc, (d, v)| acc * big(d.prob(*v)))
}

fn check_exact(game: &CoinGame, budget: u128) -> Result<u128, CoinGameError> {
    let needed = game.outcome_space();
    if needed > budget || game.players() > DEFAULT_MAX_PLAYERS {
        return Err(CoinGameError::BudgetExceeded { needed, budget });
    }
    Ok(needed)
}

/// Probability over `y` that at most `max_hidden` hidings force `v`.
pub fn bias_probability(
    game: &CoinGame,
    v: Bit,
    max_hidden: usize,
    mode: ProbabilityMode,
) -> Result<Probability, CoinGameError> {
    match mode {
        ProbabilityMode::Exact { budget } => {
            let space = check_exact(game, budget)?;
            let mut total = BigRational::zero();
            for index in 0..space {
                let y = sequence_at(game, index);
                if min_hiding_within(game, &y, v, max_hidden, DEFAULT_MAX_PLAYERS)?.size().is_some() {
                    total += sequence_prob(game, &y);
                }
            }
            Ok(Probability::Exact(total))
        }
        ProbabilityMode::MonteCarlo { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hits = 0u64;
            for _ in 0..trials {
                let y: Vec<u32> = game.domains.iter().map(|d| d.sample(&mut rng)).collect();
                if min_hiding_within(game, &y, v, max_hidden, DEFAULT_MAX_PLAYERS)?.size().is_some() {
                    hits += 1;
                }
            }
            Ok(Probability::Estimate {
                value: hits as f64 / trials.max(1) as f64,
                trials,
            })
        }
    }
}

/// Exact bias analysis of a game against a hiding budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub players: usize,
    pub alpha: f64,
    pub budget: usize,
    /// Minimum hiding sizes toward 0 and toward 1 per value sequence, in
    /// enumeration order; `None` is unbiasable.
    pub min_hiding: Vec<[Option<usize>; 2]>,
    /// Exact probability of biasability within the budget, toward 0 and 1.
    pub probability: [String; 2],
    pub probability_f64: [f64; 2],
}

impl BiasReport {
    /// Some target value reaches probability at least `1 − α`.
    pub fn meets_alpha(&self) -> bool {
        self.probability_f64.iter().any(|p| *p >= 1.0 - self.alpha)
    }
}

pub fn bias_report(game: &CoinGame, alpha: f64, rule: BudgetRule, budget: u128) -> Result<BiasReport, CoinGameError> {
    let space = check_exact(game, budget)?;
    let b = rule.budget(game.players(), alpha);
    let mut min_hiding = Vec::with_capacity(space as usize);
    let mut probability = [BigRational::zero(), BigRational::zero()];
    for index in 0..space {
        let y = sequence_at(game, index);
        let p = sequence_prob(game, &y);
        let mut sizes = [None, None];
        for v in [Bit::Zero, Bit::One] {
            let size = self::min_hiding(game, &y, v)?.size();
            if size.is_some_and(|s| s <= b) {
                probability[v.as_u8() as usize] += &p;
            }
            sizes[v.as_u8() as usize] = size;
        }
        min_hiding.push(sizes);
    }
    Ok(BiasReport {
        players: game.players(),
        alpha,
        budget: b,
        min_hiding,
        probability_f64: [0, 1].map(|i| probability[i].to_f64().unwrap_or(f64::NAN)),
        probability: probability.map(|p| p.to_string()),
    })
}

/// Estimate of `Pr(X − n/2 ≥ tau·√n)` for `X` a sum of `n` fair bits,
/// and the analytic floor `e^{−4(tau+1)²}/√(2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntiConcentration {
    pub n: u64,
    pub tau: f64,
    pub trials: u64,
    pub estimate: f64,
    pub bound: f64,
}

impl AntiConcentration {
    pub fn holds(&self) -> bool {
        self.estimate >= self.bound
    }
}

const TRIALS_PER_CHUNK: u64 = 1 << 16;

pub fn anti_concentration_check(
    n: u64,
    tau: f64,
    trials: u64,
    seed: u64,
    mode: ExecMode,
) -> Result<AntiConcentration, CoinGameError> {
    let limit = (n as f64).sqrt() / 8.0;
    if !(0.0..=limit).contains(&tau) {
        return Err(CoinGameError::TauOutOfRange { n, tau, limit });
    }
    let binomial = Binomial::new(n, 0.5).expect("p = 1/2 is a valid probability");
    let cut = n as f64 / 2.0 + tau * (n as f64).sqrt();
    let chunks = trials.div_ceil(TRIALS_PER_CHUNK) as usize;
    let hits: u64 = exec::map_range(mode, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
        let count = TRIALS_PER_CHUNK.min(trials - c as u64 * TRIALS_PER_CHUNK);
        (0..count).filter(|_| binomial.sample(&mut rng) as f64 >= cut).count() as u64
    })
    .into_iter()
    .sum();
    Ok(AntiConcentration {
        n,
        tau,
        trials,
        estimate: hits as f64 / trials.max(1) as f64,
        bound: (-4.0 * (tau + 1.0).powi(2)).exp() / (2.0 * std::f64::consts::PI).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(k: usize, f: BuiltinOutcome) -> CoinGame {
        CoinGame::uniform_bits(k, f.into_fn())
    }

    #[test]
    fn parity_needs_one_hiding() {
        let g = bits(3, BuiltinOutcome::Parity);
        assert_eq!(min_hiding(&g, &[1, 1, 0], Bit::One).unwrap(), Hiding::Witness(vec![0]));
        assert_eq!(min_hiding(&g, &[1, 1, 0], Bit::Zero).unwrap(), Hiding::Witness(vec![]));
    }

    #[test]
    fn majority_needs_everything_hidden() {
        let g = bits(3, BuiltinOutcome::MajorityTiesZero);
        assert_eq!(min_hiding(&g, &[1, 1, 1], Bit::Zero).unwrap(), Hiding::Witness(vec![0, 1, 2]));
    }

    #[test]
    fn threshold_can_be_unbiasable() {
        let g = bits(3, BuiltinOutcome::Threshold { c: 1 });
        assert_eq!(min_hiding(&g, &[0, 0, 0], Bit::One).unwrap(), Hiding::Unbiasable);
    }

    #[test]
    fn too_many_players_for_enumeration() {
        let g = bits(21, BuiltinOutcome::Parity);
        assert!(matches!(
            min_hiding(&g, &[0; 21], Bit::One),
            Err(CoinGameError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn zero_budget_is_plain_outcome_probability() {
        let g = bits(4, BuiltinOutcome::MajorityTiesZero);
        let p = bias_probability(&g, Bit::One, 0, ProbabilityMode::exact()).unwrap();
        // 3 or 4 ones out of 4: 5/16.
        assert_eq!(p, Probability::Exact(BigRational::new(5.into(), 16.into())));
    }

    #[test]
    fn parity_fully_biasable_with_full_budget() {
        let g = bits(3, BuiltinOutcome::Parity);
        let p = bias_probability(&g, Bit::Zero, 3, ProbabilityMode::exact()).unwrap();
        assert_eq!(p.as_f64(), 1.0);
    }

    #[test]
    fn majority_nine_players_quarter_alpha() {
        let g = bits(9, BuiltinOutcome::MajorityTiesZero);
        let b = BudgetRule::default().budget(9, 0.25);
        assert_eq!(b, 29);
        let p = bias_probability(&g, Bit::Zero, b, ProbabilityMode::exact()).unwrap();
        assert!(p.as_f64() >= 0.75);
    }

    #[test]
    fn distributions_must_normalize() {
        assert!(ValueDistribution::new(vec![Ratio::new(1, 3), Ratio::new(1, 3)]).is_err());
        assert!(ValueDistribution::new(vec![Ratio::new(1, 3), Ratio::new(2, 3)]).is_ok());
    }

    #[test]
    fn anti_concentration_range() {
        let r = anti_concentration_check(10_000, 0.0, 20_000, 1, ExecMode::Sequential).unwrap();
        assert!((r.estimate - 0.5).abs() < 0.02, "{r:?}");
        assert!((r.bound - 0.0073).abs() < 1e-4);
        assert!(anti_concentration_check(10_000, 12.6, 10, 1, ExecMode::Sequential).is_err());
    }

    #[test]
    fn monte_carlo_tracks_exact() {
        let g = bits(6, BuiltinOutcome::MajorityTiesZero);
        let exact = bias_probability(&g, Bit::One, 1, ProbabilityMode::exact()).unwrap().as_f64();
        let est = bias_probability(&g, Bit::One, 1, ProbabilityMode::MonteCarlo { trials: 20_000, seed: 3 })
            .unwrap()
            .as_f64();
        assert!((exact - est).abs() < 0.02, "{exact} vs {est}");
    }
}
