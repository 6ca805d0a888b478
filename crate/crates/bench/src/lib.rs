//! Scenario fixtures shared by the benchmarks.

use autosyn_core::harness::Scenario;

/// Honest parties with light latency and no checkers.
pub fn honest(n: u32, f: f64, slots: u64) -> Scenario {
    let mut s = Scenario::new(n, f, slots);
    s.eta = 0.9;
    s.latency = Some([0, 3]);
    s.trace = false;
    s.checks.enabled = false;
    if slots < s.epoch_len {
        s.epoch_len = slots;
    }
    s
}

/// As [`honest`] with the property checkers at small parameters.
pub fn checked(n: u32, f: f64, slots: u64) -> Scenario {
    let mut s = honest(n, f, slots);
    s.checks.enabled = true;
    s.checks.cp_k = Some(6);
    s.checks.cg_s = Some(50);
    s.checks.cq_k = Some(20);
    s.checks.ecq_s = Some(30);
    s.checks.cg2_s = Some(50);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate() {
        honest(4, 0.3, 50).validate().unwrap();
        checked(4, 0.3, 300).validate().unwrap();
    }
}
