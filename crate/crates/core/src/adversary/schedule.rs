use std::collections::BTreeMap;

use thiserror::Error;

use crate::error::ConfigError;
use crate::model::ProcessId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleParseError {
    #[error("line {line}: expected `round: id id ...`")]
    MissingColon { line: usize },
    #[error("line {line}: bad round `{text}`")]
    BadRound { line: usize, text: String },
    #[error("line {line}: bad process id `{text}`")]
    BadId { line: usize, text: String },
    #[error("process {id} is scheduled twice")]
    Duplicate { id: u32 },
}

/// Which processes crash in which round.
///
/// Text form, one entry per line, `#` starts a comment:
///
/// ```text
/// # round: ids (1-based, separated by spaces or commas)
/// 1: 3 7
/// 12: 4,9
/// ```
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CrashSchedule {
    by_round: BTreeMap<u32, Vec<ProcessId>>,
}

impl CrashSchedule {
    pub fn at_round(round: u32, ids: Vec<ProcessId>) -> Self {
        let mut by_round = BTreeMap::new();
        if !ids.is_empty() {
            by_round.insert(round.max(1), ids);
        }
        Self { by_round }
    }

    pub fn parse(text: &str) -> Result<Self, ScheduleParseError> {
        let mut by_round: BTreeMap<u32, Vec<ProcessId>> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (round, ids) = body.split_once(':').ok_or(ScheduleParseError::MissingColon { line })?;
            let round: u32 = round
                .trim()
                .parse()
                .ok()
                .filter(|r| *r >= 1)
                .ok_or_else(|| ScheduleParseError::BadRound {
                    line,
                    text: round.trim().into(),
                })?;
            for tok in ids.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
                let id: u32 = tok.parse().ok().filter(|i| *i >= 1).ok_or_else(|| ScheduleParseError::BadId {
                    line,
                    text: tok.into(),
                })?;
                if !seen.insert(id) {
                    return Err(ScheduleParseError::Duplicate { id });
                }
                by_round.entry(round).or_default().push(ProcessId::new(id));
            }
        }
        Ok(Self { by_round })
    }

    /// Processes crashing in `round`.
    pub fn at(&self, round: u32) -> &[ProcessId] {
        self.by_round.get(&round).map_or(&[], Vec::as_slice)
    }

    /// Total scheduled processes.
    pub fn len(&self) -> usize {
        self.by_round.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_round.is_empty()
    }

    pub fn check_ids(&self, n: usize) -> Result<(), ConfigError> {
        match self.by_round.values().flatten().find(|p| p.index() >= n) {
            Some(p) => Err(ConfigError::invalid("schedule", format!("{p} outside 1..={n}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_separators() {
        let s = CrashSchedule::parse("# header\n1: 3 7\n\n12: 4,9 # late\n").unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.at(1), &[ProcessId::new(3), ProcessId::new(7)]);
        assert_eq!(s.at(12), &[ProcessId::new(4), ProcessId::new(9)]);
        assert!(s.at(2).is_empty());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert_eq!(CrashSchedule::parse("3 4"), Err(ScheduleParseError::MissingColon { line: 1 }));
        assert!(matches!(CrashSchedule::parse("0: 1"), Err(ScheduleParseError::BadRound { .. })));
        assert!(matches!(CrashSchedule::parse("1: x"), Err(ScheduleParseError::BadId { .. })));
        assert_eq!(
            CrashSchedule::parse("1: 2\n2: 2"),
            Err(ScheduleParseError::Duplicate { id: 2 })
        );
    }
}
