//! Subset-enumeration reference for the graph checkers, for graphs of at
//! most 16 vertices. Sets are bitmasks.

use omcon_core::overlay::{OverlayGraph, Threshold};

fn adjacency(g: &OverlayGraph) -> Vec<u32> {
    (0..g.n())
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | 1 << u))
        .collect()
}

fn edges_within(adj: &[u32], set: u32) -> usize {
    (0..adj.len())
        .filter(|&v| set >> v & 1 == 1)
        .map(|v| (adj[v] & set).count_ones() as usize)
        .sum::<usize>()
        / 2
}

fn subsets(n: usize) -> impl Iterator<Item = u32> {
    0..1u32 << n
}

pub fn expansion(g: &OverlayGraph, ell: usize) -> bool {
    let adj = adjacency(g);
    let sized: Vec<u32> = subsets(g.n()).filter(|s| s.count_ones() as usize == ell).collect();
    sized.iter().all(|&x| {
        sized
            .iter()
            .filter(|&&y| x & y == 0)
            .all(|&y| (0..g.n()).any(|v| x >> v & 1 == 1 && adj[v] & y != 0))
    })
}

pub fn edge_sparsity(g: &OverlayGraph, ell: usize, alpha: Threshold) -> bool {
    let adj = adjacency(g);
    subsets(g.n())
        .filter(|s| (1..=ell).contains(&(s.count_ones() as usize)))
        .all(|s| !alpha.exceeded(edges_within(&adj, s), s.count_ones() as usize))
}

/// Largest subset of `within` in which every member marked by `needs` has
/// at least `delta` neighbours: the union of all such subsets.
fn largest_core(adj: &[u32], within: u32, delta: Threshold, needs: u32) -> u32 {
    let mut union = 0;
    let mut s = within;
    loop {
        let ok = (0..adj.len())
            .filter(|&v| s >> v & 1 == 1 && needs >> v & 1 == 1)
            .all(|v| delta.met_by((adj[v] & s).count_ones() as usize));
        if ok {
            union |= s;
        }
        if s == 0 {
            break;
        }
        s = (s - 1) & within;
    }
    union
}

pub fn survival_set(g: &OverlayGraph, within: &[usize], delta: Threshold) -> Vec<usize> {
    let adj = adjacency(g);
    let mask = within.iter().fold(0u32, |m, &v| m | 1 << v);
    let core = largest_core(&adj, mask, delta, u32::MAX);
    (0..g.n()).filter(|&v| core >> v & 1 == 1).collect()
}

pub fn compactness(g: &OverlayGraph, ell: usize, delta: Threshold) -> bool {
    let n = g.n();
    let adj = adjacency(g);
    let all = (1u32 << n) - 1;
    subsets(n).filter(|t| t.count_ones() as usize <= ell).all(|t| {
        let survivors = largest_core(&adj, all & !t, delta, u32::MAX).count_ones() as usize;
        3 * survivors + 4 * t.count_ones() as usize >= 3 * n
    })
}

pub fn dense_neighborhood(g: &OverlayGraph, v: usize, gamma: usize, delta: Threshold) -> usize {
    let adj = adjacency(g);
    let mut ball = 1u32 << v;
    let mut inner = 0u32;
    for _ in 0..gamma {
        inner = ball;
        ball = (0..g.n()).filter(|&u| ball >> u & 1 == 1).fold(ball, |b, u| b | adj[u]);
    }
    let core = largest_core(&adj, ball, delta, inner);
    if core >> v & 1 == 1 {
        core.count_ones() as usize
    } else {
        0
    }
}
