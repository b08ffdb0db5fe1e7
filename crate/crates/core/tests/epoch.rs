use omcon_core::adversary::{NoAdversary, ScriptedAdversary};
use omcon_core::epoch::{run_group_aggregation, run_group_spreading, GroupPartition};
use omcon_core::model::{
    AdversaryAction, AdversaryObservation, AdversaryStrategy, Bit, Encoding, Omission, ProcessId, TraceLevel,
};
use omcon_core::overlay::{GraphConfig, OverlayGraph};
use omcon_core::wire::{Msg, Tally};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inputs_with_first_group(n: usize, first: &[u8]) -> Vec<Bit> {
    (0..n)
        .map(|i| Bit::from_bool(first.get(i).map_or(i % 3 == 0, |b| *b == 1)))
        .collect()
}

#[test]
fn group_of_five_counts_its_bits() {
    // 25 processes form five groups of five.
    let n = 25;
    assert_eq!(GroupPartition::new(n).members(0), 0..5);
    let bits = inputs_with_first_group(n, &[1, 1, 0, 1, 0]);
    let (out, ex) = run_group_aggregation(&bits, &vec![true; n], 0, 0, &mut NoAdversary, TraceLevel::Summary).unwrap();
    for o in &out[..5] {
        assert_eq!(o.tally.map(|t| t.counts()), Some((3, 2)));
    }
    for (g, o) in out.iter().enumerate().skip(5) {
        let members = GroupPartition::new(n).members(o.group);
        let ones = bits[members.clone()].iter().filter(|b| **b == Bit::One).count() as u32;
        assert_eq!(o.tally.unwrap().counts(), (ones, members.len() as u32 - ones), "process {g}");
    }
    assert_eq!(ex.metrics.random_accesses, 0);
}

#[test]
fn inoperative_entry_contributes_nothing() {
    let n = 25;
    let bits = vec![Bit::One; n];
    let (out, _) = run_group_aggregation(&bits, &vec![false; n], 0, 0, &mut NoAdversary, TraceLevel::Summary).unwrap();
    assert!(out.iter().all(|o| !o.operative()));
}

/// Corrupts one process in round 1 and drops each of its messages (either
/// direction) with probability 1/2.
struct Flaky {
    target: ProcessId,
    rng: ChaCha8Rng,
}

impl AdversaryStrategy<Msg> for Flaky {
    fn name(&self) -> String {
        "flaky".into()
    }

    fn after_local(&mut self, _obs: &AdversaryObservation<'_, Msg>) -> AdversaryAction {
        AdversaryAction::none()
    }

    fn during_delivery(&mut self, obs: &AdversaryObservation<'_, Msg>) -> AdversaryAction {
        let omit = obs
            .pending
            .iter()
            .enumerate()
            .filter(|(_, e)| e.from == self.target || e.to == self.target)
            .filter(|_| self.rng.random_bool(0.5))
            .map(|(i, _)| Omission::Message(i))
            .collect();
        AdversaryAction {
            corrupt: if obs.round == 1 { vec![self.target] } else { Vec::new() },
            omit,
        }
    }
}

#[test]
fn isolated_member_is_counted_at_most_once() {
    let n = 25;
    let bits = inputs_with_first_group(n, &[1, 1, 0, 1, 0]);
    let c = ProcessId::new(3);
    let silence = AdversaryAction {
        corrupt: vec![c],
        omit: vec![Omission::AllFrom(c), Omission::AllTo(c)],
    };
    let mut full = ScriptedAdversary::new();
    for r in 1..=10 {
        let mut action = silence.clone();
        if r > 1 {
            action.corrupt.clear();
        }
        full = full.at(r, action);
    }
    let mut runs: Vec<Box<dyn AdversaryStrategy<Msg>>> = vec![Box::new(full)];
    for seed in 0..200 {
        runs.push(Box::new(Flaky {
            target: c,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }));
    }
    for mut adv in runs {
        let (out, _) = run_group_aggregation(&bits, &vec![true; n], 1, 0, adv.as_mut(), TraceLevel::Summary).unwrap();
        let survivors: Vec<u32> = out[..5]
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 2)
            .filter_map(|(_, o)| o.tally.map(|t| t.total()))
            .collect();
        assert!(survivors.iter().all(|s| (4..=5).contains(s)), "{survivors:?}");
        let (lo, hi) = (survivors.iter().min(), survivors.iter().max());
        if let (Some(lo), Some(hi)) = (lo, hi) {
            assert!(hi - lo <= 1);
        }
        // Other groups never see the fault.
        assert!(out[5..].iter().all(|o| o.tally.map(|t| t.total()) == Some(5)));
    }
}

fn pair(ones: u32, zeros: u32, members: &[usize]) -> Option<Tally> {
    Some(Tally {
        ones,
        zeros,
        provenance: members.iter().map(|m| 1u128 << m).sum(),
    })
}

#[test]
fn two_groups_on_four_vertices() {
    let g = OverlayGraph::complete(4);
    let pairs = [pair(2, 0, &[0, 1]), pair(2, 0, &[0, 1]), pair(1, 1, &[0, 1]), pair(1, 1, &[0, 1])];
    let (out, _) = run_group_spreading(&g, 3, &pairs, 3, 0, 0, &mut NoAdversary, TraceLevel::Summary).unwrap();
    for o in &out {
        assert!(o.operative);
        assert_eq!((o.ones, o.zeros), (3, 1));
    }
}

#[test]
fn silenced_neighbourhood_leaves_own_group_only() {
    let g = OverlayGraph::complete(4);
    let pairs = [pair(2, 0, &[0, 1]), pair(2, 0, &[0, 1]), pair(1, 1, &[0, 1]), pair(1, 1, &[0, 1])];
    let others: Vec<ProcessId> = (2..=4).map(ProcessId::new).collect();
    let mut adv = ScriptedAdversary::new().at(
        1,
        AdversaryAction {
            corrupt: others.clone(),
            omit: others.iter().map(|p| Omission::AllFrom(*p)).collect(),
        },
    );
    let (out, _) = run_group_spreading(&g, 3, &pairs, 3, 3, 0, &mut adv, TraceLevel::Summary).unwrap();
    assert!(!out[0].operative);
    assert_eq!((out[0].ones, out[0].zeros), (2, 0));
}

#[test]
fn each_entry_crosses_each_link_once_per_direction() {
    let n = 100;
    let cfg = GraphConfig::from_coefficient(n, 6.0, 9);
    let g = OverlayGraph::generate(&cfg);
    let part = GroupPartition::new(n);
    let pairs: Vec<Option<Tally>> = (0..n)
        .map(|v| {
            let members = part.members(part.group_of(v));
            Some(Tally {
                ones: members.len() as u32,
                zeros: 0,
                provenance: (1u128 << members.len()) - 1,
            })
        })
        .collect();
    let (out, ex) = run_group_spreading(&g, cfg.delta, &pairs, 30, 0, 0, &mut NoAdversary, TraceLevel::Summary).unwrap();
    assert!(out.iter().all(|o| o.operative && o.ones == n as u64));
    let enc = Encoding::for_n(n);
    let full_pack = part.count() as u64 * (enc.group_index() + enc.pair());
    assert!(ex.metrics.comm_bits <= 2 * g.edge_count() as u64 * full_pack);
}
