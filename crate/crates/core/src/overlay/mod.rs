//! The predetermined gossip graph: generation, text I/O and property checks.

mod certify;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::log_n;

pub use certify::{
    binomial, check_compactness, check_dense_neighborhood_growth, check_edge_sparsity, check_expansion,
    extract_survival_set, property_report, CheckMode, CompactnessWitness, ExpansionWitness, GraphPropertyReport,
    ReportRequest, SparsityWitness, Threshold, Verdict,
};

/// Coefficient of the asymptotic degree parameter `Δ = 832·log n`.
pub const ASYMPTOTIC_DEGREE_COEFFICIENT: f64 = 832.0;

/// Parameters of `G(n, Δ/(n−1))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub n: usize,
    /// Target expected degree, already capped at `n − 1`.
    pub delta: usize,
    pub generation_seed: u64,
}

impl GraphConfig {
    /// `Δ = ⌈c·log n⌉`, capped at `n − 1`.
    pub fn from_coefficient(n: usize, coefficient: f64, generation_seed: u64) -> Self {
        let raw = (coefficient * log_n(n) as f64).ceil() as usize;
        Self::with_delta(n, raw, generation_seed)
    }

    pub fn with_delta(n: usize, delta: usize, generation_seed: u64) -> Self {
        Self {
            n,
            delta: delta.min(n.saturating_sub(1)),
            generation_seed,
        }
    }

    pub fn edge_probability(&self) -> f64 {
        if self.n <= 1 {
            0.0
        } else {
            self.delta as f64 / (self.n - 1) as f64
        }
    }

    pub fn is_complete(&self) -> bool {
        self.delta + 1 >= self.n
    }
}

/// Undirected simple graph on vertices `0..n` with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayGraph {
    adjacency: Vec<Vec<u32>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("vertex {vertex} lists {other} but not vice versa")]
    Asymmetric { vertex: u32, other: u32 },
}

impl OverlayGraph {
    pub fn generate(config: &GraphConfig) -> Self {
        let n = config.n;
        let mut adjacency = vec![Vec::new(); n];
        if config.is_complete() {
            for (i, adj) in adjacency.iter_mut().enumerate() {
                adj.extend((0..n as u32).filter(|&j| j as usize != i));
            }
            return Self { adjacency };
        }
        let rho = config.edge_probability();
        let mut rng = ChaCha8Rng::seed_from_u64(config.generation_seed);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(rho) {
                    adjacency[i].push(j as u32);
                    adjacency[j].push(i as u32);
                }
            }
        }
        Self { adjacency }
    }

    /// From undirected edges; duplicates and order are normalised.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            assert!(a != b && a < n && b < n, "bad edge ({a},{b})");
            adjacency[a].push(b as u32);
            adjacency[b].push(a as u32);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        Self { adjacency }
    }

    pub fn complete(n: usize) -> Self {
        Self::generate(&GraphConfig::with_delta(n, n, 0))
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Self {
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&(b as u32)).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree_range(&self) -> (usize, usize) {
        let min = self.adjacency.iter().map(Vec::len).min().unwrap_or(0);
        let max = self.adjacency.iter().map(Vec::len).max().unwrap_or(0);
        (min, max)
    }

    /// Symmetric, loop-free and sorted.
    pub fn is_well_formed(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(v, adj)| {
            adj.windows(2).all(|w| w[0] < w[1])
                && adj.iter().all(|&u| u as usize != v && self.has_edge(u as usize, v))
        })
    }

    /// One line per vertex, `id: n1 n2 ...`, ids 1-based.
    pub fn to_adjacency_text(&self) -> String {
        let mut out = String::new();
        for (v, adj) in self.adjacency.iter().enumerate() {
            let _ = write!(out, "{}:", v + 1);
            for u in adj {
                let _ = write!(out, " {}", u + 1);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_adjacency_text(text: &str) -> Result<Self, GraphParseError> {
        let mut rows: Vec<(usize, Vec<u32>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| GraphParseError::Malformed {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let (id, rest) = line.split_once(':').ok_or_else(|| malformed("missing ':'"))?;
            let id: usize = id.trim().parse().map_err(|_| malformed("bad vertex id"))?;
            if id == 0 {
                return Err(malformed("ids start at 1"));
            }
            let nbrs = rest
                .split_whitespace()
                .map(|s| s.parse::<u32>().ok().filter(|&x| x >= 1).map(|x| x - 1))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| malformed("bad neighbor id"))?;
            rows.push((id - 1, nbrs));
        }
        let n = rows.iter().map(|(v, _)| v + 1).max().unwrap_or(0);
        let mut adjacency = vec![Vec::new(); n];
        for (v, nbrs) in rows {
            if nbrs.iter().any(|&u| u as usize >= n || u as usize == v) {
                return Err(GraphParseError::Malformed {
                    line: v + 1,
                    reason: "neighbor out of range or self-loop".into(),
                });
            }
            adjacency[v].extend(nbrs);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        let g = Self { adjacency };
        for v in 0..n {
            for &u in g.neighbors(v) {
                if !g.has_edge(u as usize, v) {
                    return Err(GraphParseError::Asymmetric {
                        vertex: v as u32 + 1,
                        other: u + 1,
                    });
                }
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_probability_gives_complete_graph() {
        let g = OverlayGraph::generate(&GraphConfig::with_delta(5, 4, 1));
        assert_eq!(g.edge_count(), 10);
        assert!(g.is_well_formed());
    }

    #[test]
    fn generation_is_deterministic() {
        let c = GraphConfig::from_coefficient(100, 12.0, 99);
        assert_eq!(OverlayGraph::generate(&c), OverlayGraph::generate(&c));
        let other = GraphConfig { generation_seed: 100, ..c };
        assert_ne!(OverlayGraph::generate(&c), OverlayGraph::generate(&other));
    }

    #[test]
    fn asymptotic_coefficient_saturates_at_desk_scale() {
        let c = GraphConfig::from_coefficient(512, ASYMPTOTIC_DEGREE_COEFFICIENT, 0);
        assert!(c.is_complete());
        assert_eq!(c.delta, 511);
    }

    #[test]
    fn adjacency_text_round_trip() {
        let g = OverlayGraph::generate(&GraphConfig::with_delta(30, 6, 5));
        let text = g.to_adjacency_text();
        assert_eq!(OverlayGraph::from_adjacency_text(&text).unwrap(), g);
        assert!(text.starts_with("1:"));
    }

    #[test]
    fn asymmetric_text_is_rejected() {
        let err = OverlayGraph::from_adjacency_text("1: 2\n2:\n").unwrap_err();
        assert!(matches!(err, GraphParseError::Asymmetric { .. }));
    }
}
