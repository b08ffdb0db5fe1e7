use super::partition::{tree_depth, TreeDecomposition};
use super::AggSub;
use crate::model::Bit;
use crate::wire::{MergedCounts, Msg, Tally};

/// Whether `heard` acknowledgements (own included) reach a majority quorum of
/// a group of `size`: `heard ≥ size/2 + 1`.
pub fn quorum_met(heard: usize, size: usize) -> bool {
    2 * heard >= size + 2
}

/// One process's part in a group aggregation call. Every member is a
/// transmitter in every stage; only operative members are sources.
#[derive(Clone, Debug)]
pub struct Aggregator {
    position: usize,
    size: usize,
    depth: u32,
    /// Counts of the bag this process currently represents; `None` once it is
    /// not (or no longer) a source.
    tally: Option<Tally>,
    slots: Vec<[Option<(usize, Tally)>; 2]>,
    heard: Vec<usize>,
}

impl Aggregator {
    pub fn new(position: usize, size: usize) -> Self {
        assert!(position < size && size <= 128, "group position out of range");
        Self {
            position,
            size,
            depth: tree_depth(size),
            tally: None,
            slots: Vec::new(),
            heard: Vec::new(),
        }
    }

    /// Stages with communication for this group (`layers − 1`).
    pub fn stages(&self) -> u32 {
        self.depth - 1
    }

    /// Resets for a new call. `bit` is `None` for an inoperative process.
    pub fn start(&mut self, bit: Option<Bit>) {
        self.tally = bit.map(|b| Tally::single(b, self.position));
        self.slots.clear();
        self.heard.clear();
    }

    pub fn tally(&self) -> Option<&Tally> {
        self.tally.as_ref()
    }

    pub fn is_source(&self) -> bool {
        self.tally.is_some()
    }

    /// First round of `stage`: returns the counts to send to the rest of the
    /// group, and records them locally (a source is its own transmitter).
    pub fn begin_stage(&mut self, stage: u32) -> Option<Tally> {
        debug_assert!(stage >= 2 && stage <= self.depth);
        let bags = self.size.div_ceil(1 << (stage - 1));
        self.slots.clear();
        self.slots.resize(bags, [None, None]);
        self.heard.clear();
        let own = self.tally?;
        self.hear_counts(stage, self.position, own);
        Some(own)
    }

    /// Transmitter: counts received from the source at `from`.
    pub fn hear_counts(&mut self, stage: u32, from: usize, tally: Tally) {
        let bag = TreeDecomposition::bag_of(from, stage);
        let side = TreeDecomposition::side_of(from, stage);
        let slot = &mut self.slots[bag][side];
        if slot.is_none_or(|(holder, _)| from < holder) {
            *slot = Some((from, tally));
        }
        if let Err(at) = self.heard.binary_search(&from) {
            self.heard.insert(at, from);
        }
    }

    /// Sources this transmitter heard, other than itself.
    pub fn heard_others(&self) -> impl Iterator<Item = usize> + '_ {
        self.heard.iter().copied().filter(move |&p| p != self.position)
    }

    /// Source: applies the confirmation quorum. `received` excludes the
    /// implicit self-confirmation. Returns whether still a source.
    pub fn take_confirmations(&mut self, received: usize) -> bool {
        if self.tally.is_some() && !quorum_met(received + 1, self.size) {
            self.tally = None;
        }
        self.tally.is_some()
    }

    /// Transmitter: merged counts for the bag of `source` at this stage.
    pub fn merged_for(&self, stage: u32, source: usize) -> MergedCounts {
        let bag = TreeDecomposition::bag_of(source, stage);
        let [l, r] = self.slots[bag];
        MergedCounts {
            children: [l.map(|x| x.1), r.map(|x| x.1)],
        }
    }

    /// Source: combines merged sets from transmitters (`(position, set)`,
    /// any order). The own set is added implicitly. Each child's value comes
    /// from the lowest-positioned transmitter that has one.
    pub fn absorb_merges(&mut self, stage: u32, merges: &[(usize, MergedCounts)]) -> bool {
        if self.tally.is_none() {
            return false;
        }
        if !quorum_met(merges.len() + 1, self.size) {
            self.tally = None;
            return false;
        }
        let own = (self.position, self.merged_for(stage, self.position));
        let mut pick: [Option<(usize, Tally)>; 2] = [None, None];
        for (from, set) in merges.iter().copied().chain(std::iter::once(own)) {
            for side in 0..2 {
                if let Some(t) = set.children[side] {
                    if pick[side].is_none_or(|(holder, _)| from < holder) {
                        pick[side] = Some((from, t));
                    }
                }
            }
        }
        let combined = pick
            .iter()
            .flatten()
            .fold(Tally::default(), |acc, (_, t)| acc.merge(*t));
        self.tally = Some(combined);
        true
    }
}

impl Aggregator {
    /// Local phase after round `sub` of `stage`: consumes that round's
    /// messages, keyed by sender position. Returns whether still a source.
    pub fn on_receive<'m>(&mut self, stage: u32, sub: AggSub, msgs: impl Iterator<Item = (usize, &'m Msg)>) -> bool {
        if stage > self.depth {
            return self.is_source();
        }
        match sub {
            AggSub::Counts => {
                for (from, m) in msgs {
                    if let Msg::Counts(t) = m {
                        self.hear_counts(stage, from, *t);
                    }
                }
                self.is_source()
            }
            AggSub::Confirm => {
                let received = msgs.filter(|(_, m)| matches!(m, Msg::Confirm)).count();
                self.take_confirmations(received)
            }
            AggSub::Merge => {
                let merges: Vec<(usize, MergedCounts)> = msgs
                    .filter_map(|(from, m)| match m {
                        Msg::Merged(set) => Some((from, *set)),
                        _ => None,
                    })
                    .collect();
                self.absorb_merges(stage, &merges)
            }
        }
    }

    /// Sends of round `sub` of `stage`, as `(position, message)`.
    pub fn on_send(&mut self, stage: u32, sub: AggSub, mut send: impl FnMut(usize, Msg)) {
        if stage > self.depth {
            return;
        }
        match sub {
            AggSub::Counts => {
                if let Some(t) = self.begin_stage(stage) {
                    for to in (0..self.size).filter(|&q| q != self.position) {
                        send(to, Msg::Counts(t));
                    }
                }
            }
            AggSub::Confirm => {
                for s in self.heard_others() {
                    send(s, Msg::Confirm);
                }
            }
            AggSub::Merge => {
                for s in self.heard_others() {
                    send(s, Msg::Merged(self.merged_for(stage, s)));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quorum_examples() {
        assert!(!quorum_met(3, 5));
        assert!(quorum_met(4, 5));
        assert!(quorum_met(2, 2));
        assert!(!quorum_met(1, 2));
        assert!(!quorum_met(1, 1));
    }

    /// Drives all members of one group with no message loss.
    fn lossless(bits: &[Bit]) -> Vec<Tally> {
        let size = bits.len();
        let mut nodes: Vec<Aggregator> = (0..size).map(|p| Aggregator::new(p, size)).collect();
        for (node, b) in nodes.iter_mut().zip(bits) {
            node.start(Some(*b));
        }
        for stage in 2..=tree_depth(size) {
            let sent: Vec<Option<Tally>> = nodes.iter_mut().map(|a| a.begin_stage(stage)).collect();
            for (from, t) in sent.iter().enumerate() {
                for (to, node) in nodes.iter_mut().enumerate() {
                    if let (Some(t), true) = (t, to != from) {
                        node.hear_counts(stage, from, *t);
                    }
                }
            }
            let mut confirmations = vec![0usize; size];
            for node in &nodes {
                for s in node.heard_others() {
                    confirmations[s] += 1;
                }
            }
            let mut merges: Vec<Vec<(usize, MergedCounts)>> = vec![Vec::new(); size];
            for (p, node) in nodes.iter().enumerate() {
                for s in node.heard_others() {
                    merges[s].push((p, node.merged_for(stage, s)));
                }
            }
            for (p, node) in nodes.iter_mut().enumerate() {
                node.take_confirmations(confirmations[p]);
                node.absorb_merges(stage, &merges[p]);
            }
        }
        nodes.iter().map(|a| *a.tally().unwrap()).collect()
    }

    #[test]
    fn lossless_group_counts_everyone() {
        use Bit::*;
        let bits = [One, One, Zero, One, Zero];
        for t in lossless(&bits) {
            assert_eq!(t.counts(), (3, 2));
            assert_eq!(t.provenance, 0b11111);
        }
    }
}
