use crate::wire::{Msg, PackEntry, Tally};

/// A process's overlay links and the neighbours it has stopped talking to.
/// Disregarding is permanent for the lifetime of the value.
#[derive(Clone, Debug)]
pub struct Links {
    neighbors: Vec<u32>,
    disregarded: Vec<bool>,
}

impl Links {
    pub fn new(neighbors: &[u32]) -> Self {
        Self {
            neighbors: neighbors.to_vec(),
            disregarded: vec![false; neighbors.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// `(slot, neighbour)` pairs still in use, in increasing neighbour order.
    pub fn active(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.disregarded[*i])
            .map(|(i, &v)| (i, v))
    }

    pub fn is_disregarded(&self, slot: usize) -> bool {
        self.disregarded[slot]
    }

    pub fn disregarded_count(&self) -> usize {
        self.disregarded.iter().filter(|d| **d).count()
    }

    /// Matches one round's senders (ascending) against active links. Silent
    /// active neighbours are disregarded; for each active neighbour that did
    /// send, `on_message(slot, index_in_senders)` runs. Returns how many
    /// active neighbours were heard.
    pub fn receive_round(&mut self, senders: &[u32], mut on_message: impl FnMut(usize, usize)) -> usize {
        let mut heard = 0;
        let mut j = 0;
        for (slot, &v) in self.neighbors.iter().enumerate() {
            while j < senders.len() && senders[j] < v {
                j += 1;
            }
            if self.disregarded[slot] {
                continue;
            }
            if j < senders.len() && senders[j] == v {
                heard += 1;
                on_message(slot, j);
            } else {
                self.disregarded[slot] = true;
            }
        }
        heard
    }
}

/// Whether `received` messages in a round keep a process operative: at least `Δ/3`.
pub fn enough_neighbors(received: usize, delta: usize) -> bool {
    3 * received >= delta
}

/// The per-group array gossiped over the overlay, with per-link bookkeeping
/// of which entries each neighbour already has.
#[derive(Clone, Debug)]
pub struct Spreader {
    packs: Vec<Option<Tally>>,
    known: u128,
    shared: Vec<u128>,
}

impl Spreader {
    pub fn new(groups: usize, own_group: usize, own: Tally, links: usize) -> Self {
        assert!(groups <= 128, "at most 128 groups");
        let mut packs = vec![None; groups];
        packs[own_group] = Some(own);
        Self {
            packs,
            known: 1u128 << own_group,
            shared: vec![0; links],
        }
    }

    /// Entries the neighbour in `slot` has neither sent nor been sent yet.
    pub fn outgoing(&mut self, slot: usize) -> Vec<PackEntry> {
        let fresh = self.known & !self.shared[slot];
        self.shared[slot] |= fresh;
        let mut out = Vec::with_capacity(fresh.count_ones() as usize);
        let mut bits = fresh;
        while bits != 0 {
            let g = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            out.push(PackEntry {
                group: g as u16,
                tally: self.packs[g].expect("known entry"),
            });
        }
        out
    }

    /// Merges entries from the neighbour in `slot`. Empty slots take the
    /// received value; an already filled slot keeps its first value.
    pub fn absorb(&mut self, slot: usize, entries: &[PackEntry]) {
        for e in entries {
            let g = e.group as usize;
            if g >= self.packs.len() {
                continue;
            }
            self.shared[slot] |= 1u128 << g;
            if self.packs[g].is_none() {
                self.packs[g] = Some(e.tally);
                self.known |= 1u128 << g;
            }
        }
    }

    pub fn entry(&self, group: usize) -> Option<&Tally> {
        self.packs[group].as_ref()
    }

    pub fn filled(&self) -> usize {
        self.known.count_ones() as usize
    }

    /// Sums over non-empty entries.
    pub fn totals(&self) -> (u64, u64) {
        self.packs.iter().flatten().fold((0, 0), |(o, z), t| (o + t.ones as u64, z + t.zeros as u64))
    }
}

/// One spreading send: every active link gets the entries it lacks (possibly none).
pub fn spread_send(spreader: &mut Spreader, links: &Links, mut send: impl FnMut(u32, Msg)) {
    for (slot, v) in links.active() {
        send(v, Msg::Spread(spreader.outgoing(slot)));
    }
}

/// One spreading receive from `(sender, entries)` pairs sorted by sender.
/// Returns the number of active neighbours heard.
pub fn spread_receive(spreader: &mut Spreader, links: &mut Links, msgs: &[(u32, &[PackEntry])]) -> usize {
    let senders: Vec<u32> = msgs.iter().map(|m| m.0).collect();
    links.receive_round(&senders, |slot, j| spreader.absorb(slot, msgs[j].1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Bit;

    #[test]
    fn silent_neighbors_are_dropped_for_good() {
        let mut links = Links::new(&[1, 3, 5]);
        let mut got = Vec::new();
        assert_eq!(links.receive_round(&[1, 5], |s, j| got.push((s, j))), 2);
        assert_eq!(got, vec![(0, 0), (2, 1)]);
        assert!(links.is_disregarded(1));
        // Even if 3 speaks again it is ignored.
        assert_eq!(links.receive_round(&[1, 3, 5], |_, _| {}), 2);
        assert_eq!(links.active().map(|(_, v)| v).collect::<Vec<_>>(), vec![1, 5]);
    }

    #[test]
    fn entries_cross_each_link_once() {
        let t = Tally::single(Bit::One, 0);
        let mut s = Spreader::new(4, 0, t, 2);
        assert_eq!(s.outgoing(0).len(), 1);
        assert!(s.outgoing(0).is_empty());
        s.absorb(1, &[PackEntry { group: 2, tally: t }]);
        // Link 1 supplied group 2, so only group 0 goes back.
        let back: Vec<u16> = s.outgoing(1).iter().map(|e| e.group).collect();
        assert_eq!(back, vec![0]);
        assert_eq!(s.outgoing(0).iter().map(|e| e.group).collect::<Vec<_>>(), vec![2]);
        assert_eq!(s.totals(), (2, 0));
    }

    #[test]
    fn first_write_wins() {
        let a = Tally { ones: 1, zeros: 0, provenance: 1 };
        let b = Tally { ones: 0, zeros: 1, provenance: 2 };
        let mut s = Spreader::new(2, 0, a, 2);
        s.absorb(0, &[PackEntry { group: 1, tally: a }]);
        s.absorb(1, &[PackEntry { group: 1, tally: b }]);
        assert_eq!(s.entry(1), Some(&a));
    }

    #[test]
    fn delta_third_rule() {
        assert!(enough_neighbors(10, 30));
        assert!(!enough_neighbors(9, 30));
        assert!(enough_neighbors(0, 0));
    }
}
