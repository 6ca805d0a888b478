use super::*;

fn quick(n: u32, f: f64, slots: u64) -> Scenario {
    let mut s = Scenario::new(n, f, slots);
    s.epoch_len = 50;
    s
}

#[test]
fn smoke_single_party() {
    let mut s = quick(1, 0.5, 200);
    s.checks.cp_k = Some(5);
    s.checks.cg_s = Some(40);
    s.checks.cq_k = Some(10);
    s.checks.ecq_s = Some(40);
    s.checks.cg2_s = Some(40);
    let out = run(s).unwrap();
    let r = &out.report;
    eprintln!("{}", r.metrics_csv());
    eprintln!("{:?}", r.round_lengths);
    assert_eq!(r.outcome, Outcome::Clean, "{:#?}", r.properties);
    assert_eq!(r.slots_completed, 200);
}

#[test]
fn smoke_many_parties() {
    let mut s = quick(8, 0.3, 300);
    s.eta = 0.8;
    s.latency = Some([1, 3]);
    s.checks.cp_k = Some(6);
    s.checks.cg_s = Some(60);
    s.checks.cq_k = Some(20);
    s.checks.ecq_s = Some(60);
    s.checks.cg2_s = Some(60);
    s.events = vec![
        Event { tick: 500, party: 3, action: Action::Offline, to: None, amount: None },
        Event { tick: 900, party: 3, action: Action::Online, to: None, amount: None },
        Event { tick: 1200, party: 4, action: Action::Stall, to: None, amount: None },
        Event { tick: 1500, party: 4, action: Action::Resume, to: None, amount: None },
    ];
    let t = std::time::Instant::now();
    let out = run(s).unwrap();
    let r = &out.report;
    eprintln!("{:?}", t.elapsed());
    eprintln!("{}", r.metrics_csv());
    eprintln!("{:?}", r.round_lengths);
    eprintln!("{:?} {:?}", r.round_sync, r.rate_audit);
    eprintln!("{}", r.char_string);
    assert_eq!(r.outcome, Outcome::Clean, "{:#?}", r.properties);
}

#[test]
fn figures_reproduce() {
    for id in FigureId::ALL {
        let f = figure_with_runs(id, 200).unwrap();
        eprintln!("{id} seed={} expected={} observed={}", f.seed, f.expected, f.observed);
        assert!(f.pass, "{id}");
    }
}

fn sweep_base() -> serde_json::Value {
    serde_json::json!({"n_parties": 3, "f": 0.5, "slots": 60, "epoch_len": 30, "trace": false,
        "checks": {"cp_k": 4, "cg_s": 20, "cq_k": 8, "ecq_s": 20, "cg2_s": 20}})
}

#[test]
fn sweep_rows_and_errors() {
    let vals = parse_values("0.67, 0.8, 1.0");
    let rows = sweep(&sweep_base(), "eta", &vals).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.error.is_none()), "{rows:?}");
    let csv = sweep_csv("eta", &rows);
    assert_eq!(csv.lines().count(), 4);
    assert!(sweep(&sweep_base(), "eta", &[]).unwrap().is_empty());
    assert!(sweep(&sweep_base(), "no_such_axis", &vals).is_err());
    let bad = sweep(&sweep_base(), "f", &parse_values("0.5, 7")).unwrap();
    assert!(bad[0].error.is_none() && bad[1].error.is_some());
}

#[test]
fn sweep_nested_axis() {
    let rows = sweep(&sweep_base(), "adversary.jitter", &parse_values("0, 3")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.outcome.is_some()));
}

#[test]
fn bounds_rows() {
    let one = r#"{"f": 0.05, "eta": 0.8, "beta": 1, "eps": 0.25, "alpha": 0.9, "r": 1e4, "l": 1e4, "q": 1e6, "k": 9600, "s": 9600}"#;
    let t = bound_tables(&parse_bounds(one).unwrap());
    assert_eq!(t.len(), 1);
    let csv = bounds_csv(&t);
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    for col in ["lift", "cp", "cg", "ecq", "cq", "cp_epoch"] {
        let i = header.iter().position(|h| *h == col).unwrap();
        assert!(row[i].parse::<f64>().is_ok(), "{col}");
    }
    let bad = r#"[{"f": 0.05, "eta": 0.5, "beta": 1, "eps": 0.25, "alpha": 0.5, "r": 1e4, "l": 1e4, "q": 1e6, "k": 9600, "s": 9600}]"#;
    let csv = bounds_csv(&bound_tables(&parse_bounds(bad).unwrap()));
    assert!(csv.lines().nth(1).unwrap().contains("lift: "));
}

#[test]
fn replay_is_byte_identical() {
    let mut s = Scenario::new(4, 0.4, 120);
    s.epoch_len = 40;
    s.eta = 0.7;
    s.latency = Some([0, 4]);
    s.trace_network = true;
    let a = run(s.clone()).unwrap();
    let b = run(s).unwrap();
    assert_eq!(a.report.to_json(), b.report.to_json());
    assert_eq!(a.trace, b.trace);
}
