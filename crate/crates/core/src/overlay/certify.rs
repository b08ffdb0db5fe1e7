use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::OverlayGraph;
use crate::error::CheckError;
use crate::exec::{self, ExecMode};
use crate::model::derive_seed;

/// A non-negative rational `num/den`, for degree and density bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Threshold {
    pub num: u64,
    pub den: u64,
}

impl Threshold {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        Self { num, den }
    }

    pub fn integer(k: u64) -> Self {
        Self::new(k, 1)
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `count ≥ num/den`.
    pub fn met_by(self, count: usize) -> bool {
        count as u128 * self.den as u128 >= self.num as u128
    }

    /// `edges > (num/den)·size`.
    pub fn exceeded(self, edges: usize, size: usize) -> bool {
        edges as u128 * self.den as u128 > self.num as u128 * size as u128
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CheckMode {
    /// Full enumeration if it needs at most `budget` cases.
    Exact { budget: u128 },
    /// Random cases plus targeted heuristics.
    Sampled { trials: u64, seed: u64, exec: ExecMode },
}

impl CheckMode {
    pub fn exact() -> Self {
        CheckMode::Exact { budget: 1_000_000 }
    }

    pub fn sampled(trials: u64, seed: u64) -> Self {
        CheckMode::Sampled {
            trials,
            seed,
            exec: ExecMode::Parallel,
        }
    }
}

/// Outcome of one property check. A failing verdict always carries a witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict<W> {
    pub holds: bool,
    pub witness: Option<W>,
    pub cases: u64,
    pub violations: u64,
    pub violation_rate: f64,
    pub mode: CheckMode,
}

impl<W> Verdict<W> {
    fn from_cases(mode: CheckMode, cases: u64, violations: u64, witness: Option<W>) -> Self {
        Self {
            holds: witness.is_none(),
            witness,
            cases,
            violations,
            violation_rate: if cases == 0 { 0.0 } else { violations as f64 / cases as f64 },
            mode,
        }
    }
}

/// Two disjoint sets of equal size with no edge between them (vertices 0-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionWitness {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl ExpansionWitness {
    pub fn reverifies(&self, g: &OverlayGraph) -> bool {
        self.left.iter().all(|a| !self.right.contains(a))
            && self.left.iter().all(|&a| self.right.iter().all(|&b| !g.has_edge(a, b)))
    }
}

/// A set with more internal edges than allowed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityWitness {
    pub set: Vec<usize>,
    pub internal_edges: usize,
}

impl SparsityWitness {
    pub fn reverifies(&self, g: &OverlayGraph, alpha: Threshold) -> bool {
        internal_edges(g, &self.set) == self.internal_edges && alpha.exceeded(self.internal_edges, self.set.len())
    }
}

/// A removal set whose survivors fall short of `n − 4|T|/3`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactnessWitness {
    pub removed: Vec<usize>,
    pub survivors: usize,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc == u128::MAX {
            break;
        }
    }
    acc
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn internal_edges(g: &OverlayGraph, set: &[usize]) -> usize {
    let mut mark = vec![false; g.n()];
    for &v in set {
        mark[v] = true;
    }
    set.iter()
        .map(|&v| g.neighbors(v).iter().filter(|&&u| mark[u as usize]).count())
        .sum::<usize>()
        / 2
}

fn check_budget(needed: u128, budget: u128) -> Result<(), CheckError> {
    if needed > budget {
        Err(CheckError::BudgetExceeded { needed, budget })
    } else {
        Ok(())
    }
}

/// Chunked Monte-Carlo driver: each chunk gets its own seed so results do not
/// depend on the execution mode.
fn sampled<W: Send>(
    trials: u64,
    seed: u64,
    mode: ExecMode,
    trial: impl Fn(&mut ChaCha8Rng) -> Option<W> + Sync + Send,
) -> (u64, Option<W>) {
    const CHUNKS: u64 = 32;
    let per = trials.div_ceil(CHUNKS).max(1);
    let chunks = trials.div_ceil(per) as usize;
    let results = exec::map_range(mode, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
        let count = per.min(trials - c as u64 * per);
        let mut violations = 0u64;
        let mut first = None;
        for _ in 0..count {
            if let Some(w) = trial(&mut rng) {
                violations += 1;
                first.get_or_insert(w);
            }
        }
        (violations, first)
    });
    let violations = results.iter().map(|r| r.0).sum();
    let witness = results.into_iter().find_map(|r| r.1);
    (violations, witness)
}

/// Every two disjoint `ell`-subsets are joined by an edge.
pub fn check_expansion(g: &OverlayGraph, ell: usize, mode: CheckMode) -> Result<Verdict<ExpansionWitness>, CheckError> {
    let n = g.n();
    if ell == 0 || 2 * ell > n {
        return Err(CheckError::InvalidArgument(format!("need 1 <= ell <= n/2, got ell={ell}, n={n}")));
    }
    match mode {
        CheckMode::Exact { budget } => {
            check_budget(binomial(n, ell), budget)?;
            // For each X, any ell vertices outside N[X] form a violating Y.
            let mut idx: Vec<usize> = (0..ell).collect();
            let mut closed = vec![0u64; n];
            let mut stamp = 0u64;
            let mut cases = 0u64;
            loop {
                cases += 1;
                stamp += 1;
                for &x in &idx {
                    closed[x] = stamp;
                    for &u in g.neighbors(x) {
                        closed[u as usize] = stamp;
                    }
                }
                let far: Vec<usize> = (0..n).filter(|&v| closed[v] != stamp).take(ell).collect();
                if far.len() == ell {
                    let w = ExpansionWitness {
                        left: idx.clone(),
                        right: far,
                    };
                    return Ok(Verdict::from_cases(mode, cases, 1, Some(w)));
                }
                if !next_combination(&mut idx, n) {
                    return Ok(Verdict::from_cases(mode, cases, 0, None));
                }
            }
        }
        CheckMode::Sampled { trials, seed, exec } => {
            let (violations, witness) = sampled(trials, seed, exec, |rng| {
                let picked = sample(rng, n, 2 * ell).into_vec();
                let (left, right) = picked.split_at(ell);
                let mut mark = vec![false; n];
                for &a in left {
                    mark[a] = true;
                }
                let crossing = right.iter().any(|&b| g.neighbors(b).iter().any(|&u| mark[u as usize]));
                (!crossing).then(|| {
                    let mut left = left.to_vec();
                    let mut right = right.to_vec();
                    left.sort_unstable();
                    right.sort_unstable();
                    ExpansionWitness { left, right }
                })
            });
            Ok(Verdict::from_cases(mode, trials, violations, witness))
        }
    }
}

/// Every set of at most `ell` vertices spans at most `alpha·|X|` edges.
pub fn check_edge_sparsity(
    g: &OverlayGraph,
    ell: usize,
    alpha: Threshold,
    mode: CheckMode,
) -> Result<Verdict<SparsityWitness>, CheckError> {
    let n = g.n();
    let ell = ell.min(n);
    match mode {
        CheckMode::Exact { budget } => {
            let needed = (1..=ell).fold(0u128, |acc, k| acc.saturating_add(binomial(n, k)));
            check_budget(needed, budget)?;
            let mut cases = 0u64;
            for k in 1..=ell {
                let mut idx: Vec<usize> = (0..k).collect();
                loop {
                    cases += 1;
                    let e = internal_edges(g, &idx);
                    if alpha.exceeded(e, k) {
                        let w = SparsityWitness {
                            set: idx,
                            internal_edges: e,
                        };
                        return Ok(Verdict::from_cases(mode, cases, 1, Some(w)));
                    }
                    if !next_combination(&mut idx, n) {
                        break;
                    }
                }
            }
            Ok(Verdict::from_cases(mode, cases, 0, None))
        }
        CheckMode::Sampled { trials, seed, exec } => {
            if ell < 2 {
                return Ok(Verdict::from_cases(mode, 0, 0, None));
            }
            let (mut violations, mut witness) = sampled(trials, seed, exec, |rng| {
                let k = rng.random_range(2..=ell);
                let mut set = sample(rng, n, k).into_vec();
                set.sort_unstable();
                let e = internal_edges(g, &set);
                alpha.exceeded(e, k).then_some(SparsityWitness { set, internal_edges: e })
            });
            let mut cases = trials;
            for w in densest_candidates(g, ell, seed, exec) {
                cases += 1;
                if alpha.exceeded(w.internal_edges, w.set.len()) {
                    violations += 1;
                    witness.get_or_insert(w);
                }
            }
            Ok(Verdict::from_cases(mode, cases, violations, witness))
        }
    }
}

/// Dense small subgraphs found greedily: min-degree peeling of the whole
/// graph, and best-first growth from seed vertices. Reports, per start, the
/// prefix of size ≤ ell with the highest edges-per-vertex ratio.
fn densest_candidates(g: &OverlayGraph, ell: usize, seed: u64, mode: ExecMode) -> Vec<SparsityWitness> {
    let n = g.n();
    let mut out = Vec::new();
    if let Some(w) = peel_densest(g, ell) {
        out.push(w);
    }
    let max_starts = (50_000_000 / (ell * n).max(1)).max(16);
    let starts: Vec<usize> = if n <= max_starts {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xd3_5e));
        sample(&mut rng, n, max_starts).into_vec()
    };
    out.extend(exec::map(mode, &starts, |&s| grow_densest(g, s, ell)));
    out
}

fn better(a: &SparsityWitness, edges: usize, size: usize) -> bool {
    // edges/size > a.edges/a.size
    edges * a.set.len() > a.internal_edges * size
}

fn peel_densest(g: &OverlayGraph, ell: usize) -> Option<SparsityWitness> {
    let n = g.n();
    let mut alive = vec![true; n];
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut edges = g.edge_count();
    let mut size = n;
    let mut best: Option<(usize, usize, usize)> = None;
    let mut order = Vec::with_capacity(n);
    while size > 0 {
        if size <= ell && best.is_none_or(|(e, s, _)| edges * s > e * size) {
            best = Some((edges, size, order.len()));
        }
        let v = (0..n).filter(|&v| alive[v]).min_by_key(|&v| (deg[v], v))?;
        alive[v] = false;
        order.push(v);
        edges -= deg[v];
        for &u in g.neighbors(v) {
            if alive[u as usize] {
                deg[u as usize] -= 1;
            }
        }
        size -= 1;
    }
    let (edges, _, removed) = best?;
    let mut gone = vec![false; n];
    for &v in &order[..removed] {
        gone[v] = true;
    }
    let set: Vec<usize> = (0..n).filter(|&v| !gone[v]).collect();
    Some(SparsityWitness { set, internal_edges: edges })
}

fn grow_densest(g: &OverlayGraph, start: usize, ell: usize) -> SparsityWitness {
    let n = g.n();
    let mut inside = vec![false; n];
    let mut links = vec![0usize; n];
    let mut set = vec![start];
    inside[start] = true;
    for &u in g.neighbors(start) {
        links[u as usize] += 1;
    }
    let mut edges = 0;
    let mut best = SparsityWitness {
        set: set.clone(),
        internal_edges: 0,
    };
    while set.len() < ell {
        let Some(next) = (0..n).filter(|&v| !inside[v]).max_by_key(|&v| (links[v], std::cmp::Reverse(v))) else {
            break;
        };
        inside[next] = true;
        edges += links[next];
        set.push(next);
        for &u in g.neighbors(next) {
            links[u as usize] += 1;
        }
        if better(&best, edges, set.len()) {
            let mut s = set.clone();
            s.sort_unstable();
            best = SparsityWitness {
                set: s,
                internal_edges: edges,
            };
        }
    }
    best
}

/// The δ-core of `G[within]`: the unique maximal subset where every vertex
/// has at least `delta` neighbours inside it. Empty when nothing survives.
pub fn extract_survival_set(g: &OverlayGraph, within: &[usize], delta: Threshold) -> Vec<usize> {
    let n = g.n();
    let mut alive = vec![false; n];
    for &v in within {
        alive[v] = true;
    }
    let mut deg = vec![0usize; n];
    for &v in within {
        deg[v] = g.neighbors(v).iter().filter(|&&u| alive[u as usize]).count();
    }
    let mut queue: VecDeque<usize> = within.iter().copied().filter(|&v| !delta.met_by(deg[v])).collect();
    while let Some(v) = queue.pop_front() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &u in g.neighbors(v) {
            let u = u as usize;
            if alive[u] {
                deg[u] -= 1;
                if !delta.met_by(deg[u]) {
                    queue.push_back(u);
                }
            }
        }
    }
    (0..n).filter(|&v| alive[v]).collect()
}

/// Removing any `T` with `|T| ≤ ell` leaves a `delta`-core of size at least
/// `n − 4|T|/3`.
pub fn check_compactness(
    g: &OverlayGraph,
    ell: usize,
    delta: Threshold,
    mode: CheckMode,
) -> Result<Verdict<CompactnessWitness>, CheckError> {
    let n = g.n();
    let ell = ell.min(n);
    let judge = |removed: &[usize]| -> Option<CompactnessWitness> {
        let mut gone = vec![false; n];
        for &v in removed {
            gone[v] = true;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| !gone[v]).collect();
        let survivors = extract_survival_set(g, &rest, delta).len();
        (3 * survivors + 4 * removed.len() < 3 * n).then(|| CompactnessWitness {
            removed: removed.to_vec(),
            survivors,
        })
    };
    match mode {
        CheckMode::Exact { budget } => {
            let needed = (0..=ell).fold(0u128, |acc, k| acc.saturating_add(binomial(n, k)));
            check_budget(needed, budget)?;
            let mut cases = 0u64;
            for k in 0..=ell {
                let mut idx: Vec<usize> = (0..k).collect();
                loop {
                    cases += 1;
                    if let Some(w) = judge(&idx) {
                        return Ok(Verdict::from_cases(mode, cases, 1, Some(w)));
                    }
                    if k == 0 || !next_combination(&mut idx, n) {
                        break;
                    }
                }
            }
            Ok(Verdict::from_cases(mode, cases, 0, None))
        }
        CheckMode::Sampled { trials, seed, exec } => {
            let (mut violations, mut witness) = sampled(trials, seed, exec, |rng| {
                let k = rng.random_range(0..=ell);
                let mut removed = sample(rng, n, k).into_vec();
                removed.sort_unstable();
                judge(&removed)
            });
            // Targeted: strip the neighbourhoods of the lowest-degree vertices.
            let mut by_degree: Vec<usize> = (0..n).collect();
            by_degree.sort_by_key(|&v| (g.degree(v), v));
            let attacks: Vec<usize> = by_degree.into_iter().take(16).collect();
            let extra = exec::map(exec, &attacks, |&v| {
                let mut removed: Vec<usize> = g.neighbors(v).iter().map(|&u| u as usize).take(ell).collect();
                removed.sort_unstable();
                judge(&removed)
            });
            let cases = trials + attacks.len() as u64;
            for w in extra.into_iter().flatten() {
                violations += 1;
                witness.get_or_insert(w);
            }
            Ok(Verdict::from_cases(mode, cases, violations, witness))
        }
    }
}

/// Size of the maximal (γ,δ)-dense neighbourhood of `v`, or 0 if `v` is
/// peeled. Distances are inclusive: `N^γ(v)` contains `v`.
pub fn check_dense_neighborhood_growth(g: &OverlayGraph, v: usize, gamma: usize, delta: Threshold) -> usize {
    let n = g.n();
    let mut dist = vec![usize::MAX; n];
    dist[v] = 0;
    let mut queue = VecDeque::from([v]);
    let mut ball = vec![v];
    while let Some(u) = queue.pop_front() {
        if dist[u] == gamma {
            continue;
        }
        for &w in g.neighbors(u) {
            let w = w as usize;
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                ball.push(w);
                queue.push_back(w);
            }
        }
    }
    let mut alive = vec![false; n];
    for &u in &ball {
        alive[u] = true;
    }
    let mut deg = vec![0usize; n];
    for &u in &ball {
        deg[u] = g.neighbors(u).iter().filter(|&&w| alive[w as usize]).count();
    }
    // Only vertices strictly inside the ball carry a degree requirement.
    let inner = |u: usize| dist[u] < gamma;
    let mut queue: VecDeque<usize> = ball.iter().copied().filter(|&u| inner(u) && !delta.met_by(deg[u])).collect();
    let mut size = ball.len();
    while let Some(u) = queue.pop_front() {
        if !alive[u] {
            continue;
        }
        if u == v {
            return 0;
        }
        alive[u] = false;
        size -= 1;
        for &w in g.neighbors(u) {
            let w = w as usize;
            if alive[w] {
                deg[w] -= 1;
                if inner(w) && !delta.met_by(deg[w]) {
                    queue.push_back(w);
                }
            }
        }
    }
    size
}

/// Which checks to run for a [`GraphPropertyReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub expansion_ell: usize,
    pub sparsity_ell: usize,
    pub sparsity_alpha: Threshold,
    pub compact_ell: usize,
    pub compact_delta: Threshold,
    pub mode: CheckMode,
}

impl ReportRequest {
    /// The bounds used by the analysis: `(n/10)`-expansion,
    /// `(n/10, Δ/15)`-sparsity and removal of up to `n/15` vertices with a
    /// `Δ/3` degree floor.
    pub fn standard(n: usize, delta: usize, mode: CheckMode) -> Self {
        Self {
            expansion_ell: (n / 10).max(1),
            sparsity_ell: (n / 10).max(1),
            sparsity_alpha: Threshold::new(delta as u64, 15),
            compact_ell: n / 15,
            compact_delta: Threshold::new(delta as u64, 3),
            mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphPropertyReport {
    pub n: usize,
    pub edges: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub request: ReportRequest,
    pub expansion: Option<Verdict<ExpansionWitness>>,
    pub edge_sparsity: Option<Verdict<SparsityWitness>>,
    pub compactness: Option<Verdict<CompactnessWitness>>,
}

impl GraphPropertyReport {
    pub fn all_hold(&self) -> bool {
        self.expansion.as_ref().is_none_or(|v| v.holds)
            && self.edge_sparsity.as_ref().is_none_or(|v| v.holds)
            && self.compactness.as_ref().is_none_or(|v| v.holds)
    }
}

/// Runs every requested check; a check whose arguments do not apply to this
/// graph (or whose exact budget is exceeded) is left out.
pub fn property_report(g: &OverlayGraph, req: &ReportRequest) -> GraphPropertyReport {
    let (min_degree, max_degree) = g.degree_range();
    GraphPropertyReport {
        n: g.n(),
        edges: g.edge_count(),
        min_degree,
        max_degree,
        request: *req,
        expansion: check_expansion(g, req.expansion_ell, req.mode).ok(),
        edge_sparsity: check_edge_sparsity(g, req.sparsity_ell, req.sparsity_alpha, req.mode).ok(),
        compactness: check_compactness(g, req.compact_ell, req.compact_delta, req.mode).ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact() -> CheckMode {
        CheckMode::exact()
    }

    #[test]
    fn expansion_examples() {
        assert!(check_expansion(&OverlayGraph::complete(5), 2, exact()).unwrap().holds);
        let v = check_expansion(&OverlayGraph::path(5), 2, exact()).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        assert_eq!((w.left.clone(), w.right.clone()), (vec![0, 1], vec![3, 4]));
        assert!(w.reverifies(&OverlayGraph::path(5)));
    }

    #[test]
    fn sparsity_examples() {
        let k5 = OverlayGraph::complete(5);
        let v = check_edge_sparsity(&k5, 4, Threshold::integer(1), exact()).unwrap();
        let w = v.witness.unwrap();
        assert_eq!(w.set, vec![0, 1, 2, 3]);
        assert_eq!(w.internal_edges, 6);
        let empty = OverlayGraph::from_edges(6, []);
        assert!(check_edge_sparsity(&empty, 6, Threshold::integer(0), exact()).unwrap().holds);
        assert!(check_edge_sparsity(&OverlayGraph::cycle(5), 5, Threshold::integer(1), exact()).unwrap().holds);
    }

    #[test]
    fn survival_examples() {
        let k5 = OverlayGraph::complete(5);
        let all: Vec<usize> = (0..5).collect();
        assert_eq!(extract_survival_set(&k5, &all, Threshold::integer(4)), all);
        assert!(extract_survival_set(&OverlayGraph::path(5), &all, Threshold::integer(2)).is_empty());
        assert!(extract_survival_set(&k5, &all[1..], Threshold::integer(4)).is_empty());
    }

    #[test]
    fn dense_neighborhood_examples() {
        let k5 = OverlayGraph::complete(5);
        assert_eq!(check_dense_neighborhood_growth(&k5, 0, 1, Threshold::integer(4)), 5);
        let p5 = OverlayGraph::path(5);
        assert_eq!(check_dense_neighborhood_growth(&p5, 2, 1, Threshold::integer(2)), 3);
        assert_eq!(check_dense_neighborhood_growth(&p5, 0, 1, Threshold::integer(2)), 0);
        assert_eq!(check_dense_neighborhood_growth(&p5, 0, 0, Threshold::integer(2)), 1);
    }

    #[test]
    fn budget_is_reported() {
        let g = OverlayGraph::complete(40);
        let err = check_expansion(&g, 20, CheckMode::Exact { budget: 1000 }).unwrap_err();
        assert!(matches!(err, CheckError::BudgetExceeded { .. }));
    }

    #[test]
    fn sampled_modes_agree() {
        let g = OverlayGraph::generate(&super::super::GraphConfig::with_delta(60, 6, 3));
        let mk = |exec| CheckMode::Sampled { trials: 500, seed: 9, exec };
        let a = check_expansion(&g, 6, mk(ExecMode::Parallel)).unwrap();
        let b = check_expansion(&g, 6, mk(ExecMode::Sequential)).unwrap();
        assert_eq!(a.violations, b.violations);
        assert_eq!(a.witness, b.witness);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(200, 20), 1_613_587_787_967_350_073_386_147_640);
    }
}
