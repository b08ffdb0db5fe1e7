#![allow(dead_code)]

pub mod graph_oracle;

use omcon_core::adversary::ScriptedAdversary;
use omcon_core::fallback::run_fallback;
use omcon_core::model::{AdversaryAction, Bit, Omission, ProcessId, TraceLevel};

pub fn bits(pattern: &str) -> Vec<Bit> {
    pattern
        .chars()
        .map(|c| if c == '1' { Bit::One } else { Bit::Zero })
        .collect()
}

pub fn bits_of_mask(n: usize, mask: u32) -> Vec<Bit> {
    (0..n).map(|i| Bit::from_bool(mask >> i & 1 == 1)).collect()
}

#[derive(Debug, Default)]
pub struct Tally {
    pub runs: u64,
    pub failures: Vec<String>,
}

type LinkList = Vec<(ProcessId, ProcessId)>;

/// Links of `faulty` to every other process, as (from, to) pairs; outgoing
/// first, then incoming.
fn links(n: usize, faulty: usize) -> (LinkList, LinkList) {
    let f = ProcessId::from_index(faulty);
    let others: Vec<ProcessId> = (0..n).filter(|&q| q != faulty).map(ProcessId::from_index).collect();
    (
        others.iter().map(|&q| (f, q)).collect(),
        others.iter().map(|&q| (q, f)).collect(),
    )
}

fn omissions(links: &[(ProcessId, ProcessId)], mask: u32) -> Vec<Omission> {
    links
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &(from, to))| Omission::Link { from, to })
        .collect()
}

/// Runs the flood with `t = 1` over every input vector and every pattern of
/// omissions on one faulty process's links in both communication rounds.
/// Incoming omissions in the last communication round only change what
/// the faulty process itself decides, so they are fixed to none.
pub fn fallback_exhaustive(n: usize) -> Tally {
    let mut tally = Tally::default();
    let k = n - 1;
    for mask in 0..1u32 << n {
        let inputs = bits_of_mask(n, mask);
        check_fallback(&inputs, 1, ScriptedAdversary::new(), &mut tally);
        for faulty in 0..n {
            let (out, inc) = links(n, faulty);
            let f = ProcessId::from_index(faulty);
            for out1 in 0..1u32 << k {
                for in1 in 0..1u32 << k {
                    for out2 in 0..1u32 << k {
                        let mut r1 = omissions(&out, out1);
                        r1.extend(omissions(&inc, in1));
                        let adv = ScriptedAdversary::new()
                            .at(1, AdversaryAction { corrupt: vec![f], omit: r1 })
                            .at(2, AdversaryAction { corrupt: Vec::new(), omit: omissions(&out, out2) });
                        check_fallback(&inputs, 1, adv, &mut tally);
                    }
                }
            }
        }
    }
    for mask in 0..1u32 << n {
        check_fallback(&bits_of_mask(n, mask), 0, ScriptedAdversary::new(), &mut tally);
    }
    tally
}

fn check_fallback(inputs: &[Bit], t: usize, mut adv: ScriptedAdversary, tally: &mut Tally) {
    tally.runs += 1;
    let ex = match run_fallback(inputs, t, 0, &mut adv, TraceLevel::Summary) {
        Ok(ex) => ex,
        Err(e) => {
            tally.failures.push(format!("{inputs:?}: {e}"));
            return;
        }
    };
    let correct: Vec<Bit> = ex
        .decisions
        .iter()
        .enumerate()
        .filter(|(i, _)| !ex.faulty(ProcessId::from_index(*i)))
        .map(|(_, d)| d.map(|d| d.value))
        .collect::<Option<_>>()
        .unwrap_or_default();
    let agreement = !correct.is_empty() && correct.windows(2).all(|w| w[0] == w[1]);
    let validity = correct.iter().all(|v| inputs.contains(v));
    let on_time = ex.metrics.rounds == t as u32 + 2;
    if !(agreement && validity && on_time) {
        tally.failures.push(format!("{inputs:?} t={t}: decisions {correct:?}, T={}", ex.metrics.rounds));
    }
}
