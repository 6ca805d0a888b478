//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::time::{Duration, Instant};

use autosyn_core::adversary::Strategy;
use autosyn_core::chain::{
    adjust_round_length, phi, AdjustRecord, BlockRef, ChainParams, ChainValidator, EmbeddedAdjust,
};
use autosyn_core::harness::{self, Action, Admissibility, Event, FigureId, Outcome, RunReport, Scenario, Simulation};
use autosyn_core::metrics::{
    cp_epoch, divergence, divergence_brute_force, for_each_binary_string, reduction_case_audit, BoundParams, Symbol,
};
use autosyn_core::network::{Network, Rd};
use autosyn_core::{Digest, Tick};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within_3sigma(count: f64, n: f64, p: f64) -> (bool, f64) {
    let sigma = (n * p * (1.0 - p)).sqrt();
    ((count - n * p).abs() <= 3.0 * sigma, sigma)
}

fn quiet(mut s: Scenario) -> Scenario {
    s.trace = false;
    s
}

fn crit1() -> Verdict {
    let mut s = quiet(Scenario::new(1, 0.05, 20_000));
    // An epoch without blocks invalidates the chain; at f=0.05 that needs
    // epochs long enough to make it negligible (0.95^1000).
    s.epoch_len = 1000;
    s.checks.enabled = false;
    let t = Instant::now();
    let r = harness::run(s).expect("valid scenario").report;
    let elapsed = t.elapsed();
    let blocks = r.chain.final_len as f64;
    let (ok, sigma) = within_3sigma(blocks, 20_000.0, 0.05);
    verdict(
        ok && elapsed < Duration::from_secs(10) && r.outcome == Outcome::Clean,
        format!("{blocks} blocks, expected 1000 ± {:.1}, {:.2?}", 3.0 * sigma, elapsed),
    )
}

fn crit2() -> Verdict {
    let l = 50_000u64;
    let mut s = quiet(Scenario::new(2, 0.1, l));
    s.stakes = Some(vec![25, 75]);
    s.checks.enabled = false;
    let r = harness::run(s).expect("valid scenario").report;
    let n = l as f64;
    let mut ok = r.slots_completed == l;
    let mut parts = Vec::new();
    for (lr, alpha) in r.leader_rates.iter().zip([0.25, 0.75]) {
        let p = phi(0.1, alpha).unwrap();
        let (good, sigma) = within_3sigma(lr.leader_slots as f64, n, p);
        ok &= good;
        parts.push(format!("p{} {:.5} vs {:.5}±{:.5}", lr.party, lr.rate, p, 3.0 * sigma / n));
    }
    let nonempty = r.char_string.iter().filter(|s| *s != Symbol::Bot).count() as f64;
    let p1 = phi(0.1, 1.0).unwrap();
    let (good, sigma) = within_3sigma(nonempty, n, p1);
    ok &= good;
    parts.push(format!("nonempty {:.5} vs {:.5}±{:.5}", nonempty / n, p1, 3.0 * sigma / n));
    verdict(ok, parts.join(", "))
}

fn crit3() -> Verdict {
    let mut net: Network<u8> = Network::new("bc", 2.0 / 3.0, 20240917);
    for p in 0..101 {
        net.register(p);
    }
    let (mut copies, mut on_time) = (0u64, 0u64);
    for i in 0..300 {
        for leak in net.honest_multicast(0, 0, 10, i).expect("sender registered") {
            copies += 1;
            on_time += (leak.rd == Rd::OnTimeUnset) as u64;
        }
    }
    let frac = on_time as f64 / copies as f64;
    verdict(
        copies >= 30_000 && (frac - 2.0 / 3.0).abs() <= 0.01,
        format!("{copies} copies, on-time fraction {frac:.4}"),
    )
}

fn crit4() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (eta, seed) in [(2.0 / 3.0, 41), (0.8, 42), (0.95, 43)] {
        let a = reduction_case_audit(eta, 10_000, seed);
        let unexpected: usize = a.rows.iter().map(|r| r.unexpected.len()).sum();
        let survival = a.rows.iter().filter_map(|r| r.zero_survival).fold(f64::INFINITY, f64::min);
        ok &= a.pass && unexpected == 0;
        parts.push(format!("eta {eta:.3}: min 0->0 {survival:.4} (floor {:.4}), {unexpected} bad images", a.survival_floor));
    }
    verdict(ok, parts.join("; "))
}

fn crit5() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for id in FigureId::ALL {
        let f = harness::figure(id).expect("figure runs");
        ok &= f.pass;
        parts.push(format!("{id}: {}", f.observed));
    }
    verdict(ok, parts.join("; "))
}

fn crit6() -> Verdict {
    let mut s = quiet(Scenario::new(20, 0.2, 500));
    s.eta = 0.8;
    s.latency = Some([0, 3]);
    s.seed = 6;
    s.checks.enabled = false;
    let r = harness::run(s).expect("valid scenario").report;
    let uniform = r.round_lengths.iter().all(|e| e.uniform);
    let rounds: Vec<String> = r.round_lengths.iter().map(|e| format!("{:?}", e.t_round)).collect();
    verdict(
        r.round_sync.violations == 0 && uniform && r.round_lengths.len() >= 5 && r.slots_completed == 500,
        format!(
            "{} sync checks, {} violations, rounds per epoch {}",
            r.round_sync.checked,
            r.round_sync.violations,
            rounds.join(" ")
        ),
    )
}

fn churn_events(seed: u64, parties: &[u32], horizon: Tick) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    for &p in parties {
        let mut t = rng.gen_range(50..300);
        while t < horizon {
            let (down, up) = if rng.gen_bool(0.5) {
                (Action::Offline, Action::Online)
            } else {
                (Action::Stall, Action::Resume)
            };
            let gap = rng.gen_range(20..200);
            events.push(Event { tick: t, party: p, action: down, to: None, amount: None });
            events.push(Event { tick: t + gap, party: p, action: up, to: None, amount: None });
            t += gap + rng.gen_range(100..400);
        }
    }
    events
}

fn crit7() -> Verdict {
    let mut s = quiet(Scenario::new(6, 0.3, 300));
    s.eta = 0.9;
    s.latency = Some([0, 2]);
    s.seed = 7;
    s.checks.enabled = false;
    s.events = churn_events(7, &[3, 4, 5], 2500);
    let r = harness::run(s).expect("valid scenario").report;
    verdict(
        r.round_sync.resyncs >= 5 && r.round_sync.resync_mismatches == 0 && r.slots_completed == 300,
        format!(
            "{} reactivations, {} mismatches, {} sync violations",
            r.round_sync.resyncs, r.round_sync.resync_mismatches, r.round_sync.violations
        ),
    )
}

fn synthetic(rng: &mut ChaCha8Rng, round: Tick, n: usize) -> Vec<EmbeddedAdjust> {
    (0..n)
        .map(|i| {
            let t_now = rng.gen_range(0..100_000);
            let recv = t_now + round;
            EmbeddedAdjust {
                record: AdjustRecord {
                    last: Some(BlockRef {
                        hash: Digest([i as u8; 32]),
                        slot: i as u64 + 1,
                        t_now,
                    }),
                    recv: Some(recv),
                    party: i as u32,
                    slot: i as u64 + 2,
                    y: rng.gen(),
                    proof: Digest([7; 32]),
                },
                t_adj: recv - round,
            }
        })
        .collect()
}

fn crit8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = ChainParams::default();
    let mut fixpoint = true;
    for _ in 0..500 {
        let round = rng.gen_range(2..200);
        let (n1, n2) = (rng.gen_range(1..20), rng.gen_range(0..20));
        let w1 = synthetic(&mut rng, round, n1);
        let w2 = synthetic(&mut rng, round, n2);
        let out = adjust_round_length((&w1, round), Some((&w2, round)), round, &params);
        fixpoint &= out.new_round == round && out.raw.is_some_and(|v| v.abs() < 1e-12);
    }

    let mut s = quiet(Scenario::new(8, 0.3, 400));
    s.eta = 0.85;
    s.latency = Some([1, 6]);
    s.seed = 8;
    s.checks.enabled = false;
    let mut sim = Simulation::new(s).expect("valid scenario");
    while sim.step() {}
    let epochs = 4;
    let per_party: Vec<Vec<(Tick, Option<u64>)>> = sim
        .parties()
        .iter()
        .map(|p| {
            let mut v = ChainValidator::new(sim.genesis().clone(), sim.params().clone());
            let st = v.state(p.chain(), sim.registry()).expect("honest chain is valid");
            (1..=epochs)
                .map(|e| {
                    let info = st.epoch_info(e, sim.genesis(), sim.params());
                    (info.round, info.adjust.as_ref().and_then(|a| a.raw.map(f64::to_bits)))
                })
                .collect()
        })
        .collect();
    let identical = per_party.windows(2).all(|w| w[0] == w[1]);
    let rounds: Vec<Tick> = per_party[0].iter().map(|(r, _)| *r).collect();
    verdict(
        fixpoint && identical,
        format!("fixpoint over 500 synthetic epochs: {fixpoint}; 8 parties agree on rounds {rounds:?}: {identical}"),
    )
}

fn crit9_clean() -> (bool, String) {
    let mut s = quiet(Scenario::new(10, 0.05, 10_000));
    s.eta = 0.8;
    s.epoch_len = 1000;
    s.latency = Some([0, 2]);
    s.seed = 9;
    s.adversary.corrupted = vec![9];
    s.checks.eps = 0.25;
    s.admissibility = Some(Admissibility {
        alpha: 0.9,
        beta: 1.0,
        eta: 0.8,
        eps: 0.25,
    });
    let r = harness::run(s).expect("valid scenario").report;
    let props: Vec<String> = r
        .properties
        .iter()
        .map(|p| format!("{} {}/{}", p.property, p.violations, p.checked))
        .collect();
    (
        r.outcome == Outcome::Clean && r.properties.len() == 5 && r.properties.iter().all(|p| p.ok()),
        format!("k={} s_ecq={}: {}", r.checks.cq_k, r.checks.ecq_s, props.join(", ")),
    )
}

fn private_fork(seed: u64) -> RunReport {
    let mut s = quiet(Scenario::new(2, 0.5, 200));
    s.seed = seed;
    s.stakes = Some(vec![55, 45]);
    s.adversary.strategy = Strategy::PrivateFork;
    s.adversary.corrupted = vec![1];
    s.adversary.release_depth = 3;
    s.checks.cp_k = Some(2);
    s.checks.cg_s = Some(20);
    s.checks.cq_k = Some(4);
    s.checks.cq_mu = Some(0.26);
    s.checks.ecq_s = Some(8);
    s.checks.cg2_s = Some(20);
    harness::run(s).expect("valid scenario").report
}

fn crit9() -> Verdict {
    let (clean, detail) = crit9_clean();
    let mut detected = 0;
    let mut by_prop = std::collections::BTreeMap::<String, u32>::new();
    for seed in 0..50 {
        let r = private_fork(seed);
        if r.outcome == Outcome::Violation {
            detected += 1;
        }
        for p in r.properties.iter().filter(|p| !p.ok()) {
            *by_prop.entry(p.property.split('(').next().unwrap().to_string()).or_default() += 1;
        }
    }
    verdict(
        clean && detected > 0,
        format!("clean run: {detail}; private fork flagged in {detected}/50 seeds {by_prop:?}"),
    )
}

fn crit10() -> Verdict {
    type Set = (BoundParams, f64, f64, f64, f64, [f64; 7]);
    let p = |f, beta, eta, eps, r, l, q, alpha| BoundParams {
        f,
        eta,
        beta,
        eps,
        alpha,
        r,
        l,
        q,
        omega: 1.0 / 20.0,
        delta: 2.0,
    };
    let sets: [Set; 3] = [
        (
            p(0.05, 0.9, 2.0 / 3.0, 0.5, 1e3, 1e4, 1e5, None),
            500.0,
            6400.0,
            1600.0,
            6400.0,
            [
                1.00418988139146e18,
                1.00418988139542e18,
                1.00419019959652e18,
                1.00419004059343e18,
                1.00419019959652e18,
                53566.1099093982,
                395802.991122028,
            ],
        ),
        (
            p(0.5, 1.0, 1.0, 0.5, 4e6, 1e7, 1e6, None),
            300.0,
            400.0,
            100.0,
            400.0,
            [
                2.64603899734248e-40,
                7926335704.78017,
                1.81392123577477e16,
                9.16030224066257e15,
                1.81392123577477e16,
                429085155.05396,
                3170534281.91207,
            ],
        ),
        (
            p(0.05, 1.0, 0.8, 0.25, 1e4, 1e4, 1e6, Some(0.9)),
            9600.0,
            9600.0,
            2400.0,
            9600.0,
            [
                9.99416272634845e21,
                9.9941627263485e21,
                9.99416272682666e21,
                9.99416272658765e21,
                9.99416272682666e21,
                6056383.89104214,
                44750960.3275703,
            ],
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut all = true;
    for (params, k, s_cg, s_ecq, k_cq, golden) in sets {
        let got = [
            params.lift(),
            params.cp(k),
            params.cg(s_cg),
            params.ecq(s_ecq),
            params.cq(k_cq),
            params.divergence_tail(k),
            cp_epoch(params.r, params.eps, k),
        ];
        for (g, want) in got.into_iter().zip(golden) {
            match g {
                Ok(v) => {
                    let rel = ((v - want) / want).abs();
                    worst = worst.max(rel);
                    all &= rel < 5e-10;
                }
                Err(_) => all = false,
            }
        }
    }
    verdict(all, format!("21 values, worst relative error {worst:.2e}"))
}

fn crit11() -> Verdict {
    let t = Instant::now();
    let mut checked = 0u64;
    let mut mismatches = 0u64;
    for_each_binary_string(12, |w, brute| {
        checked += 1;
        if divergence(w) != brute {
            mismatches += 1;
        }
    });
    // Also cover strings with empty slots against the direct enumeration.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let len = rng.gen_range(1..=10);
        let w = autosyn_core::metrics::CharString(
            (0..len)
                .map(|_| match rng.gen_range(0..3) {
                    0 => Symbol::Zero,
                    1 => Symbol::One,
                    _ => Symbol::Bot,
                })
                .collect(),
        );
        checked += 1;
        if divergence(&w) != divergence_brute_force(&w) {
            mismatches += 1;
        }
    }
    let elapsed = t.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(60),
        format!("{checked} strings, {mismatches} mismatches, {elapsed:.2?}"),
    )
}

fn crit12() -> Verdict {
    let mut s = Scenario::new(5, 0.3, 200);
    s.epoch_len = 50;
    s.eta = 0.75;
    s.latency = Some([0, 5]);
    s.seed = 12;
    s.trace_network = true;
    s.adversary.corrupted = vec![4];
    s.adversary.strategy = Strategy::MaxDelay;
    s.events = churn_events(12, &[2], 1500);
    let dir = tempfile::tempdir().expect("tempdir");
    let read = |name: &str, sub: &str| std::fs::read(dir.path().join(sub).join(name)).expect("output written");
    for sub in ["a", "b"] {
        let out = harness::run(s.clone()).expect("valid scenario");
        out.write_to(&dir.path().join(sub)).expect("writable");
    }
    let same = ["report.json", "trace.jsonl", "metrics.csv"]
        .iter()
        .all(|f| read(f, "a") == read(f, "b"));
    let bytes = read("report.json", "a").len();
    verdict(same, format!("report.json ({bytes} bytes), trace.jsonl and metrics.csv identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("leader-election rate", crit1),
        ("stake proportionality", crit2),
        ("delivery calibration", crit3),
        ("reduction case audit", crit4),
        ("figure regressions", crit5),
        ("round synchrony", crit6),
        ("slot-number oracle", crit7),
        ("adjustment determinism", crit8),
        ("security properties", crit9),
        ("bound goldens", crit10),
        ("divergence oracle", crit11),
        ("determinism", crit12),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1?}]",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            t.elapsed()
        );
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
