//! Run summary and the files written for each run.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::adversary::AdversaryStats;
use crate::metrics::{BoundTable, CharString, CheckReport, RateAudit, Violation};
use crate::types::{PartyId, Slot, Tick};

use super::scenario::{ResolvedChecks, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Clean,
    /// A property checker or the round-synchrony assertion fired.
    Violation,
    /// The wrapper stopped the run.
    Halted,
    /// The tick budget ran out before the last slot.
    Incomplete,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Clean => 0,
            Outcome::Violation | Outcome::Incomplete => 2,
            Outcome::Halted => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyncReport {
    pub checked: u64,
    pub violations: u64,
    pub witnesses: Vec<Violation>,
    /// Rejoins whose computed slot matched the reference party.
    pub resyncs: u64,
    pub resync_mismatches: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRounds {
    pub epoch: u64,
    /// Round lengths seen at alert honest parties during the epoch.
    pub t_round: Vec<Tick>,
    pub uniform: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeaderRate {
    pub party: PartyId,
    pub stake: u64,
    pub leader_slots: u64,
    pub blocks: u64,
    pub rate: f64,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Delivery {
    pub copies: u64,
    pub on_time: u64,
    pub realized_eta: Option<f64>,
    /// Per-slot on-time fraction, `None` for slots without honest traffic.
    pub per_slot: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSummary {
    pub final_len: usize,
    pub final_head: String,
    pub honest_blocks: u64,
    pub adversarial_blocks: u64,
    pub distinct_blocks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub seed: u64,
    pub outcome: Outcome,
    pub halt_reason: Option<String>,
    pub slots_completed: Slot,
    pub ticks: Tick,
    pub clock_extensions: u64,
    pub checks: ResolvedChecks,
    pub properties: Vec<CheckReport>,
    pub round_sync: SyncReport,
    pub round_lengths: Vec<EpochRounds>,
    pub delivery: Delivery,
    pub leader_rates: Vec<LeaderRate>,
    pub char_string: CharString,
    pub reduced: CharString,
    pub divergence: u32,
    pub rate_audit: RateAudit,
    pub chain: ChainSummary,
    pub adversary: AdversaryStats,
    pub bounds: BoundTable,
    pub scenario: Scenario,
}

impl RunReport {
    pub fn property(&self, name: &str) -> Option<&CheckReport> {
        self.properties
            .iter()
            .find(|p| p.property.split('(').next() == Some(name))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Long-format `metric,value` rows.
    pub fn metrics_csv(&self) -> String {
        let mut rows: BTreeMap<String, String> = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            rows.insert(k.to_string(), v);
        };
        put("outcome", format!("{:?}", self.outcome).to_lowercase());
        put("slots_completed", self.slots_completed.to_string());
        put("ticks", self.ticks.to_string());
        put("divergence", self.divergence.to_string());
        put("round_sync.violations", self.round_sync.violations.to_string());
        put("resync.mismatches", self.round_sync.resync_mismatches.to_string());
        put("delivery.copies", self.delivery.copies.to_string());
        put(
            "delivery.realized_eta",
            self.delivery.realized_eta.map_or(String::new(), |e| format!("{e:.6}")),
        );
        put("chain.final_len", self.chain.final_len.to_string());
        put("chain.adversarial_blocks", self.chain.adversarial_blocks.to_string());
        for p in &self.properties {
            put(&format!("{}.checked", p.property), p.checked.to_string());
            put(&format!("{}.violations", p.property), p.violations.to_string());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "value"]).expect("in-memory write");
        for (k, v) in rows {
            w.write_record([k, v]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Report plus the JSON-lines trace.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Vec<String>,
}

impl RunOutput {
    /// Writes `report.json`, `trace.jsonl` and `metrics.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        std::fs::write(dir.join("metrics.csv"), self.report.metrics_csv())?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("trace.jsonl"))?);
        for line in &self.trace {
            writeln!(f, "{line}")?;
        }
        f.flush()
    }
}
