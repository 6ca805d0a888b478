//! Canned timing scenarios with scripted delivery.
//!
//! Leader patterns come from a seed search over the real VRF; every network
//! copy is lossy, so only the adversary's delays (scripted or jittered)
//! decide when blocks arrive.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::adversary::{ScriptedDelay, Strategy};
use crate::chain::Chain;
use crate::types::{PartyId, Tick};

use super::report::RunReport;
use super::scenario::{ConfigError, Scenario};
use super::sim::{epoch_one_leaders, Simulation};

/// Round length used by every figure.
pub const FIG_ROUND: Tick = 20;
/// Runs of the delay-attack scenario.
pub const FIG5_RUNS: u64 = 1000;
const SEARCH_LIMIT: u64 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl FigureId {
    pub const ALL: [FigureId; 5] = [FigureId::Fig1, FigureId::Fig2, FigureId::Fig3, FigureId::Fig4, FigureId::Fig5];
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = *self as u8 + 1;
        write!(f, "fig{n}")
    }
}

impl FromStr for FigureId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown figure `{s}`, expected fig1..fig5")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FigureOutcome {
    pub id: FigureId,
    pub seed: u64,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
    pub runs: u64,
    /// Runs where the adversarial block ended up at the observer's head.
    pub displaced: Option<u64>,
    pub report: RunReport,
}

/// `slot/creator` pairs, with production ticks if `ticks` is set.
pub fn describe_chain(c: &Chain, ticks: bool) -> String {
    c.blocks()
        .iter()
        .map(|b| {
            if ticks {
                format!("s{}/p{}@{}", b.slot(), b.creator(), b.t_now())
            } else {
                format!("s{}/p{}", b.slot(), b.creator())
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn base(stakes: Vec<u64>) -> Scenario {
    let mut s = Scenario::new(stakes.len() as u32, 0.5, 4);
    s.stakes = Some(stakes);
    s.epoch_len = 4;
    s.t_round_1 = FIG_ROUND;
    s.eta = 0.0;
    s.checks.enabled = false;
    s.adversary.jitter = Some(0);
    s
}

/// First seed at or after `from` whose slot leaders are exactly `pattern`.
pub fn find_seed(sc: &Scenario, pattern: &[&[PartyId]], from: u64) -> Option<u64> {
    let mut probe = sc.clone();
    (from..from.saturating_add(SEARCH_LIMIT)).find(|&seed| {
        probe.seed = seed;
        let got = epoch_one_leaders(&probe, pattern.len() as u64);
        got.iter().zip(pattern).all(|(g, p)| g.as_slice() == *p)
    })
}

fn seeded(mut sc: Scenario, pattern: &[&[PartyId]]) -> Result<Scenario, ConfigError> {
    sc.seed = find_seed(&sc, pattern, 0)
        .ok_or_else(|| ConfigError::Invalid("no seed with the required leader pattern".into()))?;
    Ok(sc)
}

fn script(slot: u64, to: PartyId, delay: Tick) -> ScriptedDelay {
    ScriptedDelay { slot, to, delay }
}

/// Runs a scenario and returns the final chain of `party` with the report.
fn execute(sc: Scenario, party: PartyId) -> Result<(Chain, RunReport), ConfigError> {
    let mut sim = Simulation::new(sc)?;
    while sim.step() {}
    let chain = sim.parties()[party as usize].chain().clone();
    Ok((chain, sim.finish().report))
}

pub fn scenario(id: FigureId) -> Result<Scenario, ConfigError> {
    let four: &[&[PartyId]] = &[&[0], &[1], &[2], &[3]];
    match id {
        FigureId::Fig1 => {
            // Slot-2 block reaches the slot-3 leader only after its slot.
            let mut sc = base(vec![100; 4]);
            sc.adversary.script = vec![script(2, 2, 2 * FIG_ROUND)];
            seeded(sc, four)
        }
        FigureId::Fig2 => {
            // Additionally late at the slot-4 leader, after the slot-3 block.
            let mut sc = base(vec![100; 4]);
            sc.adversary.script = vec![script(2, 2, 2 * FIG_ROUND), script(2, 3, 3 * FIG_ROUND / 2)];
            seeded(sc, four)
        }
        FigureId::Fig3 => seeded(base(vec![100; 2]), &[&[], &[1], &[], &[]]),
        FigureId::Fig4 => {
            // Slot-1 block lands inside the slot-2 leader's pre-wait.
            let mut sc = base(vec![100; 2]);
            let prewait = sc.party_config().prewait(FIG_ROUND);
            sc.adversary.script = vec![script(1, 1, FIG_ROUND - prewait + prewait / 2)];
            seeded(sc, &[&[0], &[1], &[], &[]])
        }
        FigureId::Fig5 => seeded(fig5_base(), FIG5_PATTERN),
    }
}

const FIG5_PATTERN: &[&[PartyId]] = &[&[0], &[1], &[], &[]];

/// Honest slot-1 leader, corrupted slot-2 leader running the delay attack,
/// and a stakeless honest observer. Both blocks get symmetric jitter.
fn fig5_base() -> Scenario {
    let mut sc = base(vec![100, 100, 0]);
    sc.adversary.strategy = Strategy::DelayAttack;
    sc.adversary.corrupted = vec![1];
    sc.adversary.jitter = Some(2 * FIG_ROUND);
    sc
}

pub fn figure(id: FigureId) -> Result<FigureOutcome, ConfigError> {
    figure_with_runs(id, FIG5_RUNS)
}

/// As [`figure`], with the number of delay-attack runs configurable.
pub fn figure_with_runs(id: FigureId, runs: u64) -> Result<FigureOutcome, ConfigError> {
    let sc = scenario(id)?;
    let seed = sc.seed;
    let outcome = |expected: String, observed: String, report| FigureOutcome {
        id,
        seed,
        pass: expected == observed,
        expected,
        observed,
        runs: 1,
        displaced: None,
        report,
    };
    match id {
        FigureId::Fig1 | FigureId::Fig2 => {
            let (chain, report) = execute(sc, 3)?;
            let expected = if id == FigureId::Fig1 { "s1/p0 s2/p1 s4/p3" } else { "s1/p0 s3/p2 s4/p3" };
            Ok(outcome(expected.into(), describe_chain(&chain, false), report))
        }
        FigureId::Fig3 => {
            // Nothing arrives, so the leader holds its block for the full pre-wait.
            let at = FIG_ROUND + sc.party_config().prewait(FIG_ROUND);
            let (chain, report) = execute(sc, 1)?;
            Ok(outcome(format!("s2/p1@{at}"), describe_chain(&chain, true), report))
        }
        FigureId::Fig4 => {
            let delay = sc.adversary.script[0].delay;
            let (chain, report) = execute(sc, 1)?;
            let sent = chain.blocks().first().map_or(0, |b| b.t_now());
            let expected = format!("s1/p0@{sent} s2/p1@{}", sent + delay);
            Ok(outcome(expected, describe_chain(&chain, true), report))
        }
        FigureId::Fig5 => {
            let mut displaced = 0;
            let mut first = None;
            let mut next = sc.seed;
            for _ in 0..runs {
                let s = find_seed(&sc, FIG5_PATTERN, next)
                    .ok_or_else(|| ConfigError::Invalid("ran out of fig5 seeds".into()))?;
                next = s + 1;
                let mut run = sc.clone();
                run.seed = s;
                run.trace = first.is_none();
                let (chain, report) = execute(run, 2)?;
                if chain.head().is_some_and(|b| b.creator() == 1) {
                    displaced += 1;
                }
                first.get_or_insert(report);
            }
            let rate = displaced as f64 / runs.max(1) as f64;
            Ok(FigureOutcome {
                id,
                seed,
                expected: "displacement rate < 0.5".into(),
                observed: format!("{displaced}/{runs} = {rate:.4}"),
                pass: runs > 0 && rate < 0.5,
                runs,
                displaced: Some(displaced),
                report: first.expect("at least one run").clone(),
            })
        }
    }
}
