//! Randomized consensus by repeated biased-majority votes among operative
//! processes, with a deterministic fallback for the rare undecided case.

mod main_protocol;
mod vote;

use serde::{Deserialize, Serialize};

pub(crate) use main_protocol::first_decision;
pub use main_protocol::{MainNode, MainProtocol};
pub use vote::{Dissemination, VoteInstance, VoteState};

use crate::error::ConfigError;
use crate::model::{ceil_sqrt, log_n, Bit, VoteBranch};

/// An exact non-negative fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub const fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    /// `part > self · whole`
    pub fn exceeded_by(&self, part: u64, whole: u64) -> bool {
        part as u128 * self.den as u128 > self.num as u128 * whole as u128
    }

    /// `part < self · whole`
    pub fn undercut_by(&self, part: u64, whole: u64) -> bool {
        (part as u128 * self.den as u128) < self.num as u128 * whole as u128
    }

    fn cmp_key(&self, other: &Fraction) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

/// Vote thresholds, as fractions of the observed total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub set_one: Fraction,
    pub set_zero: Fraction,
    pub decide_high: Fraction,
    pub decide_low: Fraction,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            set_one: Fraction::new(18, 30),
            set_zero: Fraction::new(15, 30),
            decide_high: Fraction::new(27, 30),
            decide_low: Fraction::new(3, 30),
        }
    }
}

impl ThresholdConfig {
    /// Checks the ordering and that the voting gap is at least `3t/n`.
    pub fn validate(&self, n: usize, t: usize) -> Result<(), ConfigError> {
        use std::cmp::Ordering::*;
        let ordered = self.decide_low.cmp_key(&self.set_zero) == Less
            && self.set_zero.cmp_key(&self.set_one) != Greater
            && self.set_one.cmp_key(&self.decide_high) == Less
            && [self.set_one, self.set_zero, self.decide_high, self.decide_low]
                .iter()
                .all(|f| f.den > 0 && f.num <= f.den);
        if !ordered {
            return Err(ConfigError::invalid(
                "thresholds",
                "need decide_low < set_zero <= set_one < decide_high within [0, 1]",
            ));
        }
        // set_one - set_zero >= 3t/n
        let (a, b) = (self.set_one, self.set_zero);
        let gap_num = a.num as u128 * b.den as u128 - b.num as u128 * a.den as u128;
        let gap_den = a.den as u128 * b.den as u128;
        if gap_num * (n as u128) < 3 * (t as u128) * gap_den {
            return Err(ConfigError::invalid("thresholds", format!("voting gap below 3t/n for n={n}, t={t}")));
        }
        Ok(())
    }
}

/// Outcome of one threshold vote.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CandidateUpdate {
    pub value: Bit,
    pub branch: VoteBranch,
    pub hit_decide_high: bool,
    pub hit_decide_low: bool,
}

impl CandidateUpdate {
    pub fn decided(&self) -> bool {
        self.hit_decide_high || self.hit_decide_low
    }
}

/// Applies the thresholds to observed counts. `coin` is consulted only in the
/// band between the set rules; passing `None` keeps `current` there instead.
/// Returns `None` when nothing was observed.
pub fn decide_candidate(
    ones: u64,
    zeros: u64,
    thresholds: &ThresholdConfig,
    current: Bit,
    coin: Option<&mut dyn FnMut() -> Bit>,
) -> Option<CandidateUpdate> {
    let total = ones.checked_add(zeros).filter(|t| *t > 0)?;
    let (value, branch) = if thresholds.set_one.exceeded_by(ones, total) {
        (Bit::One, VoteBranch::SetOne)
    } else if thresholds.set_zero.undercut_by(ones, total) {
        (Bit::Zero, VoteBranch::SetZero)
    } else if let Some(flip) = coin {
        (flip(), VoteBranch::Random)
    } else {
        (current, VoteBranch::Keep)
    };
    Some(CandidateUpdate {
        value,
        branch,
        hit_decide_high: thresholds.decide_high.exceeded_by(ones, total),
        hit_decide_low: thresholds.decide_low.undercut_by(ones, total),
    })
}

/// Smallest `e ≥ 1` with `e·√n ≥ c·t·log n`, in exact integer arithmetic.
pub fn epoch_count(n: usize, t: usize, coefficient: Fraction) -> u32 {
    // e ≥ c·t·L/√n  ⇔  e²·n·den² ≥ (num·t·L)²
    let rhs = coefficient.num as u128 * t as u128 * log_n(n) as u128;
    let scale = coefficient.den as u128;
    let fits = |e: u128| e * e * n as u128 * scale * scale >= rhs * rhs;
    let mut e = (rhs / (scale * ceil_sqrt(n as u64) as u128)).max(1);
    while e > 1 && fits(e - 1) {
        e -= 1;
    }
    while !fits(e) {
        e += 1;
    }
    e as u32
}

/// Tunable constants of the main protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MainParams {
    /// `Δ = ⌈c·log n⌉`.
    pub degree_coefficient: f64,
    /// Epochs `= max(1, ⌈c·(t/√n)·log n⌉)`.
    pub epoch_coefficient: Fraction,
    /// Spreading lasts `c·log n` rounds.
    pub spread_coefficient: u32,
    pub thresholds: ThresholdConfig,
    pub graph_seed: u64,
    /// Test hook: clears every `decided` flag before dissemination, forcing
    /// the fallback path.
    pub force_undecided: bool,
}

/// Degree coefficient that keeps graphs sparse at the sizes a desk run can
/// afford; the asymptotic constant makes every graph here complete.
pub const DESK_DEGREE_COEFFICIENT: f64 = 6.0;

impl Default for MainParams {
    fn default() -> Self {
        Self {
            degree_coefficient: DESK_DEGREE_COEFFICIENT,
            epoch_coefficient: Fraction::new(1, 1),
            spread_coefficient: 8,
            thresholds: ThresholdConfig::default(),
            graph_seed: 0x005e_ed0f_9a9f,
            force_undecided: false,
        }
    }
}

impl MainParams {
    pub fn asymptotic() -> Self {
        Self {
            degree_coefficient: crate::overlay::ASYMPTOTIC_DEGREE_COEFFICIENT,
            ..Self::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vote(ones: u64, zeros: u64, coin: Bit) -> (CandidateUpdate, u32) {
        let mut flips = 0;
        let mut flip = || {
            flips += 1;
            coin
        };
        let u = decide_candidate(ones, zeros, &ThresholdConfig::default(), Bit::Zero, Some(&mut flip)).unwrap();
        (u, flips)
    }

    #[test]
    fn threshold_examples() {
        let (u, flips) = vote(25, 5, Bit::Zero);
        assert_eq!((u.value, u.branch, u.decided(), flips), (Bit::One, VoteBranch::SetOne, false, 0));
        let (u, _) = vote(3, 28, Bit::One);
        assert_eq!((u.value, u.decided()), (Bit::Zero, true));
        assert!(u.hit_decide_low);
        let (u, flips) = vote(16, 14, Bit::One);
        assert_eq!((u.value, u.branch, flips), (Bit::One, VoteBranch::Random, 1));
    }

    #[test]
    fn strict_boundaries() {
        // 18/30 of 30 is exactly 18: not above, so random band.
        assert_eq!(vote(18, 12, Bit::Zero).0.branch, VoteBranch::Random);
        assert_eq!(vote(19, 11, Bit::Zero).0.branch, VoteBranch::SetOne);
        // 15/30 of 30 is 15: not below, so random band.
        assert_eq!(vote(15, 15, Bit::Zero).0.branch, VoteBranch::Random);
        assert_eq!(vote(14, 16, Bit::One).0.branch, VoteBranch::SetZero);
        assert!(!vote(27, 3, Bit::Zero).0.hit_decide_high);
        assert!(vote(28, 2, Bit::Zero).0.hit_decide_high);
        assert!(!vote(3, 27, Bit::Zero).0.hit_decide_low);
    }

    #[test]
    fn empty_counts_are_degenerate() {
        assert!(decide_candidate(0, 0, &ThresholdConfig::default(), Bit::One, None).is_none());
    }

    #[test]
    fn keep_without_coin() {
        let u = decide_candidate(16, 14, &ThresholdConfig::default(), Bit::One, None).unwrap();
        assert_eq!((u.value, u.branch), (Bit::One, VoteBranch::Keep));
    }

    #[test]
    fn epoch_count_matches_real_ceiling() {
        for n in [1usize, 2, 30, 64, 100, 256, 1000, 1024] {
            for t in 0..=n / 30 {
                let want = ((t as f64 * log_n(n) as f64) / (n as f64).sqrt()).ceil().max(1.0) as u32;
                assert_eq!(epoch_count(n, t, Fraction::new(1, 1)), want, "n={n} t={t}");
            }
        }
        assert_eq!(epoch_count(256, 8, Fraction::new(1, 1)), 4);
        assert_eq!(epoch_count(256, 8, Fraction::new(3, 2)), 6);
    }

    #[test]
    fn default_thresholds_validate_up_to_a_thirtieth() {
        let th = ThresholdConfig::default();
        assert!(th.validate(300, 10).is_ok());
        assert!(th.validate(300, 11).is_err());
    }
}
