//! Scenario configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryConfig, Strategy, WrapperConstraints};
use crate::chain::ChainParams;
use crate::metrics::{BoundError, BoundParams};
use crate::party::{PartyConfig, SelectionRule};
use crate::types::{PartyId, Slot, Tick};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("validity gate failed: {0}")]
    Gate(#[from] BoundError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// First registration with every resource.
    Join,
    /// Ledger deregistration.
    Offline,
    Online,
    /// Random-oracle deregistration.
    Stall,
    Resume,
    /// Clock deregistration.
    Desync,
    Resync,
    Tx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub tick: Tick,
    pub party: PartyId,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<PartyId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    #[default]
    None,
    /// Epoch length large enough for the static-round statement.
    Static,
    /// Epoch length large enough for the round-adjustment statement.
    Adjust,
}

/// Checker parameters. Unset values fall back to the theory points derived
/// from `eps` and `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub cp_k: Option<u32>,
    #[serde(default)]
    pub cg_tau: Option<f64>,
    #[serde(default)]
    pub cg_s: Option<u64>,
    #[serde(default)]
    pub cq_mu: Option<f64>,
    #[serde(default)]
    pub cq_k: Option<usize>,
    #[serde(default)]
    pub ecq_s: Option<u64>,
    #[serde(default)]
    pub cg2_s: Option<u64>,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    0.25
}

impl Default for Checks {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

/// Checker parameters after defaulting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedChecks {
    pub cp_k: u32,
    pub cg_tau: f64,
    pub cg_s: u64,
    pub cq_mu: f64,
    pub cq_k: usize,
    pub ecq_s: u64,
    pub cg2_s: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Admissibility {
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    pub eta: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub n_parties: u32,
    /// Defaults to 100 per party.
    #[serde(default)]
    pub stakes: Option<Vec<u64>>,
    pub f: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "default_round")]
    pub t_round_1: Tick,
    #[serde(default = "default_t_start")]
    pub t_start: Tick,
    #[serde(default = "default_run_frac")]
    pub t_run_frac: f64,
    #[serde(default = "default_prewait_frac")]
    pub prewait_frac: f64,
    #[serde(default = "default_epoch_len")]
    pub epoch_len: Slot,
    pub slots: Slot,
    #[serde(default = "default_omega1")]
    pub omega1: f64,
    #[serde(default = "default_omega2")]
    pub omega2: f64,
    #[serde(default = "default_min_round")]
    pub min_round: Tick,
    #[serde(default = "default_l_vrf")]
    pub l_vrf: u32,
    /// Delay range applied to on-time copies the adversary leaves unset.
    #[serde(default)]
    pub latency: Option<[Tick; 2]>,
    #[serde(default = "default_rule")]
    pub selection: SelectionRule,
    #[serde(default = "default_sel_k")]
    pub selection_k: usize,
    #[serde(default = "default_sel_s")]
    pub selection_s: Slot,
    #[serde(default = "yes")]
    pub desync_vrf_gate: bool,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub admissibility: Option<Admissibility>,
    #[serde(default)]
    pub gate: Gate,
    /// Seeded activation order instead of ascending party id.
    #[serde(default)]
    pub shuffle: bool,
    #[serde(default = "yes")]
    pub trace: bool,
    #[serde(default)]
    pub trace_network: bool,
    /// Stop at the first round-synchrony violation.
    #[serde(default)]
    pub abort_on_bad_event: bool,
    #[serde(default)]
    pub max_ticks: Option<Tick>,
}

fn default_round() -> Tick {
    10
}
fn default_t_start() -> Tick {
    1
}
fn default_run_frac() -> f64 {
    0.4
}
fn default_prewait_frac() -> f64 {
    0.5
}
fn default_epoch_len() -> Slot {
    100
}
fn default_omega1() -> f64 {
    0.3
}
fn default_omega2() -> f64 {
    0.1
}
fn default_min_round() -> Tick {
    2
}
fn default_l_vrf() -> u32 {
    32
}
fn default_rule() -> SelectionRule {
    SelectionRule::LongestChain
}
fn default_sel_k() -> usize {
    20
}
fn default_sel_s() -> Slot {
    50
}

impl Scenario {
    /// Minimal scenario with defaults for everything optional.
    pub fn new(n_parties: u32, f: f64, slots: Slot) -> Self {
        let v = serde_json::json!({ "n_parties": n_parties, "f": f, "slots": slots });
        serde_json::from_value(v).expect("defaults")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn stakes(&self) -> Vec<u64> {
        self.stakes
            .clone()
            .unwrap_or_else(|| vec![100; self.n_parties as usize])
    }

    pub fn chain_params(&self) -> ChainParams {
        ChainParams {
            epoch_len: self.epoch_len,
            f: self.f,
            l_vrf: self.l_vrf,
            omega1: self.omega1,
            omega2: self.omega2,
            min_round: self.min_round,
        }
    }

    pub fn party_config(&self) -> PartyConfig {
        PartyConfig {
            t_run_frac: self.t_run_frac,
            prewait_frac: self.prewait_frac,
            rule: self.selection,
            k: self.selection_k,
            s: self.selection_s,
            desync_vrf_gate: self.desync_vrf_gate,
        }
    }

    pub fn bound_params(&self) -> BoundParams {
        BoundParams {
            f: self.f,
            eta: self.eta,
            beta: self.checks.beta,
            eps: self.checks.eps,
            alpha: self.admissibility.as_ref().map(|a| a.alpha),
            r: self.epoch_len as f64,
            l: self.slots as f64,
            q: self.slots as f64 * self.n_parties as f64,
            omega: 1.0 / 20.0,
            delta: 2.0,
        }
    }

    pub fn wrapper(&self) -> Option<WrapperConstraints> {
        self.admissibility.as_ref().map(|a| WrapperConstraints {
            alpha: a.alpha,
            beta: a.beta,
            eta: a.eta,
            eps: a.eps,
            f: self.f,
        })
    }

    pub fn resolved_checks(&self) -> ResolvedChecks {
        let c = &self.checks;
        let x = c.eps * c.beta * self.f * self.eta;
        let up = |v: f64| v.ceil().max(1.0) as u64;
        let k = up(96.0 / x);
        ResolvedChecks {
            cp_k: c.cp_k.unwrap_or(k as u32),
            cg_tau: c.cg_tau.unwrap_or(c.beta * self.f * self.eta / 16.0),
            cg_s: c.cg_s.unwrap_or(k),
            cq_mu: c.cq_mu.unwrap_or(x / 16.0),
            cq_k: c.cq_k.unwrap_or(k as usize),
            ecq_s: c.ecq_s.unwrap_or(up(24.0 / x)),
            cg2_s: c.cg2_s.unwrap_or(k),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n_parties == 0 {
            return bad("n_parties must be positive".into());
        }
        if let Some(s) = &self.stakes {
            if s.len() != self.n_parties as usize {
                return bad(format!("{} stakes for {} parties", s.len(), self.n_parties));
            }
            if s.iter().sum::<u64>() == 0 {
                return bad("total stake is zero".into());
            }
        }
        if !(self.f > 0.0 && self.f <= 1.0) {
            return bad(format!("f={} outside (0, 1]", self.f));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta={} outside [0, 1]", self.eta));
        }
        if self.t_round_1 < 2 || self.min_round < 1 {
            return bad("t_round_1 must be at least 2 and min_round at least 1".into());
        }
        if self.t_start < 1 {
            return bad("t_start must be positive".into());
        }
        if !(self.t_run_frac > 0.0 && self.t_run_frac <= 1.0) || !(0.0..=1.0).contains(&self.prewait_frac) {
            return bad("t_run_frac must lie in (0, 1] and prewait_frac in [0, 1]".into());
        }
        if self.epoch_len < 2 {
            return bad("epoch_len must be at least 2".into());
        }
        if self.slots < self.epoch_len {
            return bad(format!("slots={} below epoch_len={}", self.slots, self.epoch_len));
        }
        if !(1..=64).contains(&self.l_vrf) {
            return bad("l_vrf must lie in 1..=64".into());
        }
        if let Some([lo, hi]) = self.latency {
            if lo < 0 || hi < lo {
                return bad(format!("latency range [{lo}, {hi}] invalid"));
            }
        }
        let known = |p: PartyId| p < self.n_parties;
        for e in &self.events {
            if !known(e.party) {
                return bad(format!("event at tick {} names unknown party {}", e.tick, e.party));
            }
            if e.action == Action::Tx && !(e.to.is_some_and(known) && e.amount.is_some()) {
                return bad(format!("tx event at tick {} needs a known `to` and an `amount`", e.tick));
            }
        }
        let a = &self.adversary;
        for p in a.corrupted.iter().chain(a.corrupt_at.iter().map(|c| &c.party)) {
            if !known(*p) {
                return bad(format!("adversary names unknown party {p}"));
            }
        }
        if a.strategy.drives_parties() && a.corrupted.len() + a.corrupt_at.len() == 0 {
            return bad("strategy needs at least one corrupted party".into());
        }
        if a.strategy == Strategy::DelayAttack && !(0.0..=1.0).contains(&a.attack_lag_frac) {
            return bad("attack_lag_frac must lie in [0, 1]".into());
        }
        if let Some(w) = self.wrapper() {
            if !w.predicate() {
                return bad(format!(
                    "inadmissible bounds: alpha(1-f)^2 eta = {:.4} <= (1+eps)/2 = {:.4}",
                    w.alpha * (1.0 - w.f).powi(2) * w.eta,
                    (1.0 + w.eps) / 2.0
                ));
            }
        }
        match self.gate {
            Gate::None => {}
            Gate::Static => self.bound_params().gate_static()?,
            Gate::Adjust => self.bound_params().gate_adjust()?,
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let s = Scenario::from_json(r#"{"n_parties": 3, "f": 0.5, "slots": 200}"#).unwrap();
        assert_eq!(s.stakes(), vec![100, 100, 100]);
        assert_eq!(s.t_round_1, 10);
        assert_eq!(s.epoch_len, 100);
        assert_eq!(s.adversary.strategy, Strategy::Passive);
        assert!(s.checks.enabled);
    }

    #[test]
    fn theory_points() {
        let mut s = Scenario::new(1, 0.05, 10_000);
        s.eta = 0.8;
        let c = s.resolved_checks();
        // 96 / (0.25 * 0.05 * 0.8) = 9600
        assert_eq!(c.cq_k, 9600);
        assert_eq!(c.ecq_s, 2400);
        assert!((c.cg_tau - 0.0025).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"n_parties": 0, "f": 0.5, "slots": 200}"#,
            r#"{"n_parties": 2, "f": 0.5, "slots": 50}"#,
            r#"{"n_parties": 2, "f": 1.5, "slots": 200}"#,
            r#"{"n_parties": 2, "f": 0.5, "slots": 200, "stakes": [1]}"#,
            r#"{"n_parties": 2, "f": 0.5, "slots": 200, "bogus": 1}"#,
            r#"{"n_parties": 2, "f": 0.5, "slots": 200, "events": [{"tick": 3, "party": 5, "action": "offline"}]}"#,
            r#"{"n_parties": 2, "f": 0.5, "slots": 200, "adversary": {"strategy": "private-fork"}}"#,
            r#"{"n_parties": 2, "f": 0.5, "slots": 200, "admissibility": {"alpha": 0.5, "eta": 0.5, "eps": 0.1}}"#,
            r#"{"n_parties": 2, "f": 0.05, "slots": 200, "gate": "adjust"}"#,
        ];
        for b in bad {
            assert!(Scenario::from_json(b).is_err(), "{b}");
        }
    }
}
