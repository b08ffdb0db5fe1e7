mod common;

use common::{bits, fallback_exhaustive};
use omcon_core::adversary::{AdversarySpec, NoAdversary, ScriptedAdversary};
use omcon_core::fallback::run_fallback;
use omcon_core::model::{AdversaryAction, Bit, Omission, ProcessId, TraceLevel};
use omcon_core::wire::Msg;

fn decisions(ex: &omcon_core::model::Execution) -> Vec<Option<Bit>> {
    ex.decisions.iter().map(|d| d.map(|d| d.value)).collect()
}

#[test]
fn smallest_value_wins_without_faults() {
    let ex = run_fallback(&bits("0111"), 1, 0, &mut NoAdversary, TraceLevel::Summary).unwrap();
    assert_eq!(decisions(&ex), vec![Some(Bit::Zero); 4]);
    assert_eq!(ex.metrics.rounds, 3);
    assert_eq!(ex.metrics.omitted_messages, 0);
}

#[test]
fn unanimous_ones_under_crashes() {
    let mut adv = AdversarySpec::Crash { schedule: Some("1: 2\n2: 5".into()) }
        .build::<Msg>(6, 2)
        .unwrap();
    let ex = run_fallback(&[Bit::One; 6], 2, 0, adv.as_mut(), TraceLevel::Summary).unwrap();
    assert!(ex.decisions.iter().flatten().all(|d| d.value == Bit::One));
}

#[test]
fn late_value_without_a_long_chain_is_rejected() {
    // p4 holds the only 1 and hides it in round 1; in round 2 it can only
    // relay the 0s it heard, so nobody ever accepts 1.
    let p4 = ProcessId::new(4);
    let mut adv = ScriptedAdversary::new().at(
        1,
        AdversaryAction {
            corrupt: vec![p4],
            omit: vec![Omission::AllFrom(p4)],
        },
    );
    let ex = run_fallback(&bits("0001"), 1, 0, &mut adv, TraceLevel::Summary).unwrap();
    assert_eq!(&decisions(&ex)[..3], &[Some(Bit::Zero); 3]);
}

#[test]
fn exhaustive_small_systems() {
    for n in 2..=4 {
        let tally = fallback_exhaustive(n);
        assert!(tally.failures.is_empty(), "n={n}: {:?}", &tally.failures[..tally.failures.len().min(3)]);
    }
}

#[test]
fn communication_is_cubic() {
    for n in [4usize, 8, 16, 32] {
        let t = n - 1;
        let inputs: Vec<Bit> = (0..n).map(|i| Bit::from_bool(i % 2 == 1)).collect();
        let mut adv = AdversarySpec::Crash { schedule: None }.build::<Msg>(n, t).unwrap();
        let ex = run_fallback(&inputs, t, 0, adv.as_mut(), TraceLevel::Summary).unwrap();
        let cap = 16 * (n as u64).pow(3);
        assert!(ex.metrics.comm_bits <= cap, "n={n}: {} > {cap}", ex.metrics.comm_bits);
    }
}
