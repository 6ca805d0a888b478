//! Empirical audits of the reduction and leader-rate statements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::charstring::{CharString, Symbol};
use crate::network::{Network, Rd};

/// Outcome distribution of one short pattern under random honest delays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub pattern: String,
    pub trials: u64,
    /// Realised image string to count.
    pub images: BTreeMap<String, u64>,
    pub unexpected: Vec<String>,
    /// Fraction of trials in which the first honest block survived, for
    /// patterns starting with `0`.
    pub zero_survival: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseAudit {
    pub eta: f64,
    pub rows: Vec<CaseRow>,
    /// Lower bound `eta - 3 sigma` on first-block survival.
    pub survival_floor: f64,
    pub pass: bool,
}

fn allowed(pattern: &str) -> &'static [&'static str] {
    match pattern {
        "00" => &["00", "0⊥", "⊥0"],
        "01" => &["01", "⊥1"],
        "10" => &["10", "1⊥"],
        "11" => &["11"],
        "000" => &["000", "⊥00", "0⊥0", "00⊥", "⊥⊥0"],
        _ => &[],
    }
}

/// Plays each pattern `trials` times. Slot `i` is led by party `i`; honest
/// copies are on time with probability `eta` (drawn by the network),
/// adversarial blocks always arrive first. Each leader extends the longest
/// chain it has received, preferring the newest block on ties, and the
/// final chain is chosen the same way over all blocks.
pub fn reduction_case_audit(eta: f64, trials: u64, seed: u64) -> CaseAudit {
    let patterns = ["00", "01", "10", "11", "000"];
    let sigma = (eta * (1.0 - eta) / trials as f64).sqrt();
    let survival_floor = eta - 3.0 * sigma;
    let mut rows = Vec::new();
    let mut pass = true;
    for (pi, pat) in patterns.iter().enumerate() {
        let syms: Vec<Symbol> = pat.parse::<CharString>().expect("pattern").0;
        let mut net: Network<usize> = Network::new("audit", eta, seed ^ ((pi as u64) << 32));
        for p in 0..syms.len() as u32 {
            net.register(p);
        }
        let mut images: BTreeMap<String, u64> = BTreeMap::new();
        let mut survived = 0u64;
        for _ in 0..trials {
            let img = play(&syms, &mut net);
            if img.0.first() == Some(&Symbol::Zero) {
                survived += 1;
            }
            *images.entry(img.to_string()).or_default() += 1;
        }
        let ok = allowed(pat);
        let unexpected: Vec<String> = images.keys().filter(|k| !ok.contains(&k.as_str())).cloned().collect();
        let zero_survival = (syms[0] == Symbol::Zero).then(|| survived as f64 / trials as f64);
        pass &= unexpected.is_empty() && zero_survival.is_none_or(|z| z >= survival_floor);
        rows.push(CaseRow {
            pattern: pat.to_string(),
            trials,
            images,
            unexpected,
            zero_survival,
        });
    }
    CaseAudit {
        eta,
        rows,
        survival_floor,
        pass,
    }
}

fn play(syms: &[Symbol], net: &mut Network<usize>) -> CharString {
    let n = syms.len();
    // received[j][i]: block of slot i reached leader j in time.
    let mut received = vec![vec![false; n]; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut height = vec![0u32; n];
    let best = |cands: &mut dyn Iterator<Item = usize>, height: &[u32]| {
        cands.max_by_key(|&i| (height[i], i))
    };
    for j in 0..n {
        let mut known = (0..j).filter(|&i| received[j][i]);
        let p = best(&mut known, &height);
        parent[j] = p;
        height[j] = p.map_or(0, |i| height[i]) + 1;
        // Receiving a chain brings its ancestors along.
        let chain_of = |mut b: Option<usize>, parent: &[Option<usize>]| {
            let mut v = Vec::new();
            while let Some(i) = b {
                v.push(i);
                b = parent[i];
            }
            v
        };
        match syms[j] {
            Symbol::One => {
                for r in j + 1..n {
                    for a in chain_of(Some(j), &parent) {
                        received[r][a] = true;
                    }
                }
            }
            _ => {
                let leaks = net
                    .honest_multicast(j as u32, j, 0, 0)
                    .expect("registered sender");
                for l in leaks {
                    let r = l.recipient as usize;
                    if r > j && l.rd == Rd::OnTimeUnset {
                        for a in chain_of(Some(j), &parent) {
                            received[r][a] = true;
                        }
                    }
                }
            }
        }
        net.fetch(j as u32, i64::MAX);
    }
    let tip = best(&mut (0..n), &height);
    let mut on_chain = vec![false; n];
    let mut b = tip;
    while let Some(i) = b {
        on_chain[i] = true;
        b = parent[i];
    }
    CharString(
        syms.iter()
            .zip(&on_chain)
            .map(|(s, keep)| if *keep { *s } else { Symbol::Bot })
            .collect(),
    )
}

/// Realised symbol frequencies against the per-slot leader-rate bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateAudit {
    /// Honest-unique slots surviving reduction, over non-empty slots.
    pub freq_zero: f64,
    pub zero_floor: f64,
    pub freq_bot: f64,
    pub bot_ceiling: f64,
    pub pass: bool,
}

/// Compares `reduced` (the real reduction of `w`) with
/// `alpha (1 - f)^2 eta` and `1 - f * active * eta`, allowing three standard
/// errors of slack.
pub fn rate_audit(w: &CharString, reduced: &CharString, alpha: f64, f: f64, eta: f64, active: f64) -> RateAudit {
    let nonempty = w.iter().filter(|s| *s != Symbol::Bot).count();
    let p0 = alpha * (1.0 - f).powi(2) * eta;
    let freq_zero = if nonempty == 0 {
        0.0
    } else {
        reduced.count(Symbol::Zero) as f64 / nonempty as f64
    };
    let zero_floor = p0 - 3.0 * (p0 * (1.0 - p0) / nonempty.max(1) as f64).sqrt();
    let len = w.len().max(1) as f64;
    let freq_bot = reduced.count(Symbol::Bot) as f64 / len;
    let pb = (1.0 - f * active * eta).clamp(0.0, 1.0);
    let bot_ceiling = pb + 3.0 * (pb * (1.0 - pb) / len).sqrt();
    RateAudit {
        freq_zero,
        zero_floor,
        freq_bot,
        bot_ceiling,
        pass: (nonempty == 0 || freq_zero >= zero_floor) && freq_bot <= bot_ceiling + 1e-12,
    }
}
