use omcon_core::adversary::{AdversarySpec, ScriptedAdversary};
use omcon_core::consensus::{MainParams, MainProtocol};
use omcon_core::model::{run_execution, AdversaryAction, Bit, Execution, Omission, ProcessId, SystemConfig, TraceLevel};
use omcon_core::wire::Msg;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn suite() -> Vec<AdversarySpec> {
    vec![
        AdversarySpec::None,
        AdversarySpec::Crash { schedule: None },
        AdversarySpec::Eclipse { targets: None, period: 2 },
        AdversarySpec::CoinBiaser { direction: Bit::One },
        AdversarySpec::CoinBiaser { direction: Bit::Zero },
    ]
}

fn random_inputs(n: usize, p: f64, seed: u64) -> Vec<Bit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Bit::from_bool(rng.random_bool(p))).collect()
}

fn run(p: &MainProtocol, t: usize, inputs: &[Bit], adv: &AdversarySpec, seed: u64, level: TraceLevel) -> Execution {
    let n = inputs.len();
    let mut a = adv.build::<Msg>(n, t).unwrap();
    run_execution(&SystemConfig::new(n, t, seed).unwrap(), inputs, p, a.as_mut(), level).unwrap()
}

fn nonfaulty_decisions(ex: &Execution) -> Vec<Bit> {
    ex.decisions
        .iter()
        .enumerate()
        .filter(|(i, _)| !ex.faulty(ProcessId::from_index(*i)))
        .map(|(_, d)| d.expect("non-faulty process decided").value)
        .collect()
}

fn assert_agreement(ex: &Execution) -> Bit {
    let d = nonfaulty_decisions(ex);
    assert!(d.windows(2).all(|w| w[0] == w[1]), "disagreement");
    d[0]
}

#[test]
fn unanimous_inputs_never_flip_a_coin() {
    let (n, t) = (64, 2);
    let p = MainProtocol::new(n, t, MainParams::default()).unwrap();
    for v in [Bit::Zero, Bit::One] {
        for adv in suite() {
            for seed in 0..3 {
                let ex = run(&p, t, &vec![v; n], &adv, seed, TraceLevel::Summary);
                assert_eq!(ex.metrics.random_accesses, 0, "{adv:?}");
                assert!(ex.decisions.iter().flatten().all(|d| d.value == v));
                assert_eq!(assert_agreement(&ex), v);
            }
        }
    }
}

#[test]
fn unanimous_fault_free_run_decides_right_after_the_loop() {
    let n = 30;
    let p = MainProtocol::new(n, 0, MainParams::default()).unwrap();
    let ex = run(&p, 0, &vec![Bit::One; n], &AdversarySpec::None, 1, TraceLevel::Summary);
    let loop_end = p.instance().epoch_rounds();
    assert!(ex.decisions.iter().all(|d| d.is_some_and(|d| d.value == Bit::One && d.round <= loop_end + 2)));
    assert_eq!(ex.metrics.rounds, p.closed_form_rounds());
    assert!(!ex.metrics.fallback_triggered);
}

#[test]
fn replay_is_byte_identical() {
    let n = 30;
    let p = MainProtocol::new(n, 0, MainParams::default()).unwrap();
    let a = run(&p, 0, &vec![Bit::Zero; n], &AdversarySpec::None, 5, TraceLevel::Full);
    let b = run(&p, 0, &vec![Bit::Zero; n], &AdversarySpec::None, 5, TraceLevel::Full);
    assert_eq!(serde_json::to_string(&a.trace).unwrap(), serde_json::to_string(&b.trace).unwrap());
}

#[test]
fn forced_fallback_still_agrees() {
    let (n, t) = (64, 2);
    let params = MainParams {
        force_undecided: true,
        ..MainParams::default()
    };
    let p = MainProtocol::new(n, t, params).unwrap();
    let ex = run(&p, t, &vec![Bit::One; n], &AdversarySpec::None, 0, TraceLevel::Summary);
    assert!(ex.metrics.fallback_triggered);
    assert_eq!(assert_agreement(&ex), Bit::One);
    assert_eq!(ex.metrics.rounds, p.instance().epoch_rounds() + t as u32 + 3);
    for adv in suite() {
        for seed in 0..4 {
            let ex = run(&p, t, &random_inputs(n, 0.5, seed), &adv, seed, TraceLevel::Summary);
            assert_agreement(&ex);
        }
    }
}

#[test]
fn closed_form_without_adversary() {
    for (n, t) in [(64, 2), (128, 4)] {
        let p = MainProtocol::new(n, t, MainParams::default()).unwrap();
        for seed in 0..6 {
            let ex = run(&p, t, &random_inputs(n, 0.55, seed), &AdversarySpec::None, seed, TraceLevel::Summary);
            let extra = if ex.metrics.fallback_triggered { t as u32 + 1 } else { 0 };
            assert_eq!(ex.metrics.rounds, p.closed_form_rounds() + extra);
        }
    }
}

#[test]
fn deciding_epochs_are_unanimous_and_floor_holds() {
    let (n, t) = (128, 4);
    let p = MainProtocol::new(n, t, MainParams::default()).unwrap();
    for adv in suite() {
        for seed in 0..8 {
            let inputs = random_inputs(n, [0.5, 0.55, 0.9][seed as usize % 3], seed);
            let ex = run(&p, t, &inputs, &adv, seed, TraceLevel::Summary);
            assert_agreement(&ex);
            assert!(ex.trace.verify().is_ok());
            for c in ex.trace.checkpoints.iter().filter(|c| c.scheduled) {
                assert!(c.operative as usize >= n - 3 * t, "{adv:?} seed {seed}: {c:?}");
                if c.hit_high + c.hit_low > 0 {
                    assert!(c.operative_unanimous(), "{adv:?} seed {seed}: {c:?}");
                }
            }
        }
    }
}

#[test]
fn partially_delivered_decision_keeps_agreement() {
    let (n, t) = (64, 2);
    let p = MainProtocol::new(n, t, MainParams::default()).unwrap();
    let broadcast = p.instance().epoch_rounds() + 1;
    let p1 = ProcessId::new(1);
    for seed in 0..6 {
        let omit = (2..=n as u32).step_by(2).map(|q| Omission::Link { from: p1, to: ProcessId::new(q) }).collect();
        let mut adv = ScriptedAdversary::new().at(broadcast, AdversaryAction { corrupt: vec![p1], omit });
        let inputs = random_inputs(n, 0.7, seed);
        let ex = run_execution(&SystemConfig::new(n, t, seed).unwrap(), &inputs, &p, &mut adv, TraceLevel::Summary).unwrap();
        assert_agreement(&ex);
    }
}
