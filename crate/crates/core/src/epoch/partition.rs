use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::model::{ceil_log2, ceil_sqrt};

/// `⌈√n⌉` contiguous groups whose sizes differ by at most one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    bounds: Vec<usize>,
    group_of: Vec<u32>,
}

impl GroupPartition {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "empty partition");
        let m = ceil_sqrt(n as u64) as usize;
        let base = n / m;
        let extra = n % m;
        let mut bounds = Vec::with_capacity(m + 1);
        bounds.push(0);
        for g in 0..m {
            let size = base + usize::from(g < extra);
            bounds.push(bounds[g] + size);
        }
        let mut group_of = vec![0u32; n];
        for g in 0..m {
            for slot in &mut group_of[bounds[g]..bounds[g + 1]] {
                *slot = g as u32;
            }
        }
        Self { bounds, group_of }
    }

    pub fn count(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Member indices of group `g`.
    pub fn members(&self, g: usize) -> Range<usize> {
        self.bounds[g]..self.bounds[g + 1]
    }

    pub fn size(&self, g: usize) -> usize {
        self.bounds[g + 1] - self.bounds[g]
    }

    pub fn group_of(&self, v: usize) -> usize {
        self.group_of[v] as usize
    }

    /// Position of `v` inside its group.
    pub fn position(&self, v: usize) -> usize {
        v - self.bounds[self.group_of(v)]
    }

    /// Communication stages of the deepest group tree.
    pub fn stages(&self) -> u32 {
        tree_depth(self.max_size()) - 1
    }

    pub fn max_size(&self) -> usize {
        (0..self.count()).map(|g| self.size(g)).max().unwrap_or(0)
    }
}

/// Number of layers of the bag tree of a group of `size` members.
pub fn tree_depth(size: usize) -> u32 {
    ceil_log2(size as u64) + 1
}

/// Binary-tree bag decomposition of one group. Layer `j` (1-based) has bags
/// of `2^(j−1)` consecutive positions; the last bag of a layer may be short.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDecomposition {
    pub layers: Vec<Vec<Range<usize>>>,
}

impl TreeDecomposition {
    pub fn build(size: usize) -> Self {
        assert!(size >= 1, "empty group");
        let depth = tree_depth(size);
        let layers = (1..=depth)
            .map(|j| {
                let width = 1usize << (j - 1);
                (0..size.div_ceil(width))
                    .map(|k| k * width..((k + 1) * width).min(size))
                    .collect()
            })
            .collect();
        Self { layers }
    }

    pub fn depth(&self) -> u32 {
        self.layers.len() as u32
    }

    /// Bag index of `position` in layer `j`.
    pub fn bag_of(position: usize, layer: u32) -> usize {
        position >> (layer - 1)
    }

    /// Which child (0 left, 1 right) of its layer-`stage` bag holds `position`.
    pub fn side_of(position: usize, stage: u32) -> usize {
        (position >> (stage - 2)) & 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_member_tree() {
        let t = TreeDecomposition::build(5);
        let names = |layer: &Vec<Range<usize>>| -> Vec<String> {
            layer
                .iter()
                .map(|r| r.clone().map(|i| (b'a' + i as u8) as char).collect())
                .collect()
        };
        let got: Vec<Vec<String>> = t.layers.iter().map(names).collect();
        assert_eq!(
            got,
            vec![
                vec!["a", "b", "c", "d", "e"],
                vec!["ab", "cd", "e"],
                vec!["abcd", "e"],
                vec!["abcde"],
            ]
        );
    }

    #[test]
    fn small_trees() {
        assert_eq!(TreeDecomposition::build(1).depth(), 1);
        let t = TreeDecomposition::build(4);
        assert_eq!(t.depth(), 3);
        assert_eq!(t.layers[2], vec![0..4]);
    }

    #[test]
    fn partition_is_balanced_and_contiguous() {
        for n in 1..300 {
            let p = GroupPartition::new(n);
            assert_eq!(p.count() as u64, ceil_sqrt(n as u64));
            let sizes: Vec<usize> = (0..p.count()).map(|g| p.size(g)).collect();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1);
            assert_eq!(sizes.iter().sum::<usize>(), n);
            for v in 0..n {
                assert!(p.members(p.group_of(v)).contains(&v));
            }
        }
    }
}
