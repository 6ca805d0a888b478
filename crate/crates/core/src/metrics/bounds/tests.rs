use super::*;
use proptest::prelude::*;

fn close(a: f64, b: f64) {
    assert!(((a - b) / b).abs() < 5e-10, "{a} vs {b}");
}

struct Golden {
    p: BoundParams,
    k: f64,
    s_cg: f64,
    s_ecq: f64,
    k_cq: f64,
    want: [f64; 7],
}

fn params(f: f64, beta: f64, eta: f64, eps: f64, r: f64, l: f64, q: f64) -> BoundParams {
    BoundParams {
        f,
        eta,
        beta,
        eps,
        alpha: None,
        r,
        l,
        q,
        omega: 1.0 / 20.0,
        delta: 2.0,
    }
}

// Reference values evaluated with 50-digit arithmetic.
fn goldens() -> Vec<Golden> {
    vec![
        Golden {
            p: params(0.05, 0.9, 2.0 / 3.0, 0.5, 1e3, 1e4, 1e5),
            k: 500.0,
            s_cg: 6400.0,
            s_ecq: 1600.0,
            k_cq: 6400.0,
            want: [
                1.00418988139146e18,
                1.00418988139542e18,
                1.00419019959652e18,
                1.00419004059343e18,
                1.00419019959652e18,
                53566.1099093982,
                395802.991122028,
            ],
        },
        Golden {
            p: params(0.5, 1.0, 1.0, 0.5, 4e6, 1e7, 1e6),
            k: 300.0,
            s_cg: 400.0,
            s_ecq: 100.0,
            k_cq: 400.0,
            want: [
                2.64603899734248e-40,
                7926335704.78017,
                1.81392123577477e16,
                9.16030224066257e15,
                1.81392123577477e16,
                429085155.05396,
                3170534281.91207,
            ],
        },
        Golden {
            p: BoundParams {
                alpha: Some(0.9),
                ..params(0.05, 1.0, 0.8, 0.25, 1e4, 1e4, 1e6)
            },
            k: 9600.0,
            s_cg: 9600.0,
            s_ecq: 2400.0,
            k_cq: 9600.0,
            want: [
                9.99416272634845e21,
                9.9941627263485e21,
                9.99416272682666e21,
                9.99416272658765e21,
                9.99416272682666e21,
                6056383.89104214,
                44750960.3275703,
            ],
        },
    ]
}

#[test]
fn calculators_match_reference_values() {
    for g in goldens() {
        let p = &g.p;
        let got = [
            p.lift().unwrap(),
            p.cp(g.k).unwrap(),
            p.cg(g.s_cg).unwrap(),
            p.ecq(g.s_ecq).unwrap(),
            p.cq(g.k_cq).unwrap(),
            p.divergence_tail(g.k).unwrap(),
            cp_epoch(p.r, p.eps, g.k).unwrap(),
        ];
        for (a, b) in got.iter().zip(g.want) {
            close(*a, b);
        }
    }
}

#[test]
fn single_epoch_common_prefix_example() {
    close(cp_epoch(1e3, 0.5, 300.0).unwrap(), 792633.570478017);
}

#[test]
fn constraint_errors() {
    let mut p = params(0.05, 0.9, 2.0 / 3.0, 0.5, 1e3, 1e4, 1e5);
    assert!(matches!(p.cg(100.0), Err(BoundError::BelowFloor { .. })));
    assert!(matches!(p.ecq(100.0), Err(BoundError::BelowFloor { .. })));
    assert!(matches!(p.cq(100.0), Err(BoundError::BelowFloor { .. })));
    assert!(p.gate_static().is_err());
    p.alpha = Some(1.0);
    assert!(matches!(p.cp(500.0), Err(BoundError::Inadmissible { .. })));
    p.alpha = None;
    p.f = 0.0;
    assert!(matches!(p.lift(), Err(BoundError::Range { name: "f", .. })));
}

#[test]
fn resync_extra_window_limits() {
    let p = params(0.5, 1.0, 1.0, 0.5, 4e6, 1e7, 1e6);
    // k must exceed 384 / (eps beta eta) = 768.
    assert!(p.resync_cp_extra(700.0).is_err());
    let v = p.resync_cp_extra(2000.0).unwrap();
    assert!(v > p.cp(2000.0 / 64.0).unwrap());
    let short = BoundParams { r: 1000.0, ..p.clone() };
    assert!(matches!(short.resync_cp_extra(2000.0), Err(BoundError::AboveCeiling { .. })));
}

#[test]
fn gates() {
    let p = params(0.5, 1.0, 1.0, 0.5, 4e6, 1e7, 1e6);
    assert!(p.gate_static().is_ok());
    assert!(p.gate_adjust().is_ok());
    // 144 * 2 / (0.5 * 0.5 * 0.5) = 2304 and 288 / (0.5 * 1 * 0.5) = 1152.
    let p = BoundParams { r: 2000.0, eta: 0.5, ..p };
    assert!(p.gate_static().is_err());
    assert!(p.gate_adjust().is_ok());
    let p = BoundParams { r: 1000.0, ..p };
    assert!(p.gate_adjust().is_err());
}

#[test]
fn single_epoch_variants() {
    let p = params(0.5, 1.0, 1.0, 0.5, 1e3, 1e4, 1e5);
    // Same closed form, stated over one epoch.
    close(cq_epoch(&p, 400.0, 1e3).unwrap(), cg_epoch(&p, 400.0, 1e3).unwrap());
    assert!(honest_growth(&p, 400.0, 1e3).unwrap() < 2e6);
    assert!(ecq_epoch(&p, 100.0, 1e3).unwrap() > 0.0);
}

#[test]
fn table_keeps_errors_as_text() {
    let p = params(0.05, 0.9, 2.0 / 3.0, 0.5, 1e3, 1e4, 1e5);
    let t = BoundTable::compute(p, 500.0, 10.0);
    let cg = t.rows.iter().find(|(n, _)| n == "cg").unwrap();
    assert!(cg.1.is_err());
    assert!(t.rows.iter().find(|(n, _)| n == "lift").unwrap().1.is_ok());
}

proptest! {
    #[test]
    fn monotone_in_security_parameter(
        k in 1.0f64..5e4, dk in 0.0f64..5e3,
        l in 1e3f64..1e6, dl in 0.0f64..1e6,
    ) {
        let p = params(0.5, 1.0, 1.0, 0.5, 4e6, l, 1e6);
        let p2 = BoundParams { l: l + dl, q: 2e6, ..p.clone() };
        // The window bounds rise until s = 256 / (eps f beta eta)^2 = 4096 here.
        let s = 4096.0 + k;
        prop_assert!(p.cp(k + dk).unwrap() <= p.cp(k).unwrap());
        prop_assert!(p.cg(s + dk).unwrap() <= p.cg(s).unwrap());
        prop_assert!(p.ecq(s + dk).unwrap() <= p.ecq(s).unwrap());
        prop_assert!(p.cq(s + dk).unwrap() <= p.cq(s).unwrap());
        prop_assert!(p.divergence_tail(k + dk).unwrap() <= p.divergence_tail(k).unwrap());
        prop_assert!(p.cp(k).unwrap() <= p2.cp(k).unwrap());
        prop_assert!(p.cg(s).unwrap() <= p2.cg(s).unwrap());
        prop_assert!(p.ecq(s).unwrap() <= p2.ecq(s).unwrap());
        prop_assert!(p.lift().unwrap() <= p2.lift().unwrap());
    }
}
