use omcon_core::adversary::{AdversarySpec, ScriptedAdversary};
use omcon_core::consensus::Fraction;
use omcon_core::model::{run_execution, AdversaryAction, Bit, Execution, Omission, ProcessId, SystemConfig, TraceLevel};
use omcon_core::tradeoff::{TradeoffParams, TradeoffProtocol};
use omcon_core::wire::Msg;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_inputs(n: usize, seed: u64) -> Vec<Bit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Bit::from_bool(rng.random_bool(0.5))).collect()
}

fn protocol(n: usize, t: usize, x: usize) -> TradeoffProtocol {
    TradeoffProtocol::new(n, t, TradeoffParams { x, ..Default::default() }).unwrap()
}

fn run_spec(p: &TradeoffProtocol, t: usize, inputs: &[Bit], adv: &AdversarySpec, seed: u64) -> Execution {
    let mut a = adv.build::<Msg>(inputs.len(), t).unwrap();
    run_execution(&SystemConfig::new(inputs.len(), t, seed).unwrap(), inputs, p, a.as_mut(), TraceLevel::Summary).unwrap()
}

fn agreed_value(ex: &Execution) -> Bit {
    let d: Vec<Bit> = ex
        .decisions
        .iter()
        .enumerate()
        .filter(|(i, _)| !ex.faulty(ProcessId::from_index(*i)))
        .map(|(_, d)| d.expect("non-faulty process decided").value)
        .collect();
    assert!(d.windows(2).all(|w| w[0] == w[1]), "disagreement");
    d[0]
}

#[test]
fn constructor_bounds() {
    assert!(TradeoffProtocol::new(120, 2, TradeoffParams::default()).is_err());
    assert!(TradeoffProtocol::new(121, 2, TradeoffParams::default()).is_ok());
    assert!(TradeoffProtocol::new(64, 1, TradeoffParams { x: 0, ..Default::default() }).is_err());
    assert!(TradeoffProtocol::new(64, 1, TradeoffParams { x: 65, ..Default::default() }).is_err());
}

#[test]
fn reliable_phases_end_unanimous() {
    // With a single inner epoch the inner run rarely settles, so members can
    // leave it holding different values; give it enough epochs to settle.
    let (n, t) = (256, 4);
    let mut params = TradeoffParams::default();
    params.inner.epoch_coefficient = Fraction::new(4, 1);
    for x in [1, 4] {
        let p = TradeoffProtocol::new(n, t, TradeoffParams { x, ..params }).unwrap();
        for adv in [AdversarySpec::None, AdversarySpec::Crash { schedule: None }, AdversarySpec::Eclipse { targets: None, period: 2 }] {
            for seed in 0..3 {
                let ex = run_spec(&p, t, &random_inputs(n, seed), &adv, seed);
                agreed_value(&ex);
                for i in p.reliable_super_processes(&ex.trace) {
                    let end = p.phase_end(i) + 1;
                    let c = ex.trace.checkpoints.iter().find(|c| c.round == end).unwrap();
                    assert!(c.operative_unanimous(), "x={x} {adv:?} seed {seed} phase {i}: {c:?}");
                }
            }
        }
    }
}

#[test]
fn unanimous_ones_decide_one_without_coins() {
    let (n, t) = (128, 2);
    let p = protocol(n, t, 4);
    let ex = run_spec(&p, t, &vec![Bit::One; n], &AdversarySpec::CoinBiaser { direction: Bit::Zero }, 0);
    assert_eq!(agreed_value(&ex), Bit::One);
    assert_eq!(ex.metrics.random_accesses, 0);
}

#[test]
fn forced_mixed_values_take_the_fallback() {
    let (n, t) = (128, 2);
    let p = TradeoffProtocol::new(n, t, TradeoffParams { x: 2, force_mixed: true, ..Default::default() }).unwrap();
    for seed in 0..3 {
        let ex = run_spec(&p, t, &random_inputs(n, seed), &AdversarySpec::Crash { schedule: None }, seed);
        assert!(ex.metrics.fallback_triggered);
        agreed_value(&ex);
    }
}

#[test]
fn fault_free_runs_adopt_the_first_phase_value() {
    let n = 128;
    let p = protocol(n, 0, 4);
    for seed in 0..4 {
        let ex = run_spec(&p, 0, &random_inputs(n, seed), &AdversarySpec::None, seed);
        let c = ex.trace.checkpoints.iter().find(|c| c.round == p.phase_end(0) + 1).unwrap();
        assert!(c.operative_unanimous() && c.operative as usize == n);
        let first = Bit::from_bool(c.operative_ones > 0);
        assert_eq!(agreed_value(&ex), first);
        assert_eq!(ex.metrics.rounds, p.closed_form_rounds());
    }
}

#[test]
fn silenced_super_process_changes_nobody() {
    // Super-processes of two members; the first is corrupted and cut off.
    let (n, t, x) = (128, 2, 64);
    let p = protocol(n, t, x);
    let members = [ProcessId::new(1), ProcessId::new(2)];
    let cut = AdversaryAction {
        corrupt: Vec::new(),
        omit: members.iter().flat_map(|m| [Omission::AllFrom(*m), Omission::AllTo(*m)]).collect(),
    };
    let mut adv = ScriptedAdversary::new().at(
        1,
        AdversaryAction {
            corrupt: members.to_vec(),
            ..cut.clone()
        },
    );
    for r in 2..=p.phase_end(0) + 1 {
        adv = adv.at(r, cut.clone());
    }
    let inputs = random_inputs(n, 3);
    let ex = run_execution(&SystemConfig::new(n, t, 3).unwrap(), &inputs, &p, &mut adv, TraceLevel::Full).unwrap();
    let round = ex.trace.rounds[p.phase_end(0) as usize].detail.as_ref().unwrap();
    for (v, s) in round.snapshots.iter().enumerate().skip(2) {
        assert_eq!(s.candidate, Some(inputs[v]), "process {v}");
    }
    agreed_value(&ex);
}

#[test]
fn rounds_grow_and_randomness_shrinks_with_x() {
    let (n, t) = (256, 4);
    let (mut last_t, mut last_r) = (0u32, u64::MAX);
    for x in [1, 4, 16] {
        let p = protocol(n, t, x);
        let mut rounds = Vec::new();
        let mut random = Vec::new();
        for seed in 0..5 {
            let ex = run_spec(&p, t, &random_inputs(n, seed), &AdversarySpec::None, seed);
            rounds.push(ex.metrics.rounds);
            random.push(ex.metrics.random_bits);
        }
        rounds.sort_unstable();
        random.sort_unstable();
        assert!(rounds[2] > last_t);
        assert!(random[2] <= last_r);
        (last_t, last_r) = (rounds[2], random[2]);
    }
}
