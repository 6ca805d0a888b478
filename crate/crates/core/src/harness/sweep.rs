//! Parameter sweeps and bound tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metrics::{BoundParams, BoundTable};

use super::report::Outcome;
use super::scenario::{ConfigError, Scenario};
use super::sim::run;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: Value,
    pub outcome: Option<Outcome>,
    pub error: Option<String>,
    pub violations: u64,
    pub slots_completed: u64,
    pub final_len: usize,
    pub realized_eta: Option<f64>,
    pub divergence: u32,
}

/// Splits a comma-separated list; items that are not JSON become strings.
pub fn parse_values(list: &str) -> Vec<Value> {
    list.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
        .collect()
}

fn pointer(axis: &str) -> String {
    format!("/{}", axis.replace('.', "/"))
}

/// One run per axis value. `axis` is a dotted path into the scenario, e.g.
/// `eta` or `adversary.jitter`. Cell failures are recorded, not propagated.
pub fn sweep(base: &Value, axis: &str, values: &[Value]) -> Result<Vec<SweepRow>, ConfigError> {
    let sc: Scenario = serde_json::from_value(base.clone())?;
    let full = serde_json::to_value(&sc)?;
    let ptr = pointer(axis);
    if axis.is_empty() || full.pointer(&ptr).is_none() {
        return Err(ConfigError::Invalid(format!("unknown sweep axis `{axis}`")));
    }
    Ok(values.par_iter().map(|v| cell(&full, &ptr, v)).collect())
}

fn cell(full: &Value, ptr: &str, value: &Value) -> SweepRow {
    let mut row = SweepRow {
        value: value.clone(),
        outcome: None,
        error: None,
        violations: 0,
        slots_completed: 0,
        final_len: 0,
        realized_eta: None,
        divergence: 0,
    };
    let mut v = full.clone();
    *v.pointer_mut(ptr).expect("axis checked") = value.clone();
    let result = serde_json::from_value::<Scenario>(v)
        .map_err(ConfigError::from)
        .and_then(run);
    match result {
        Ok(out) => {
            let r = out.report;
            row.outcome = Some(r.outcome);
            row.violations = r.properties.iter().map(|p| p.violations).sum::<u64>() + r.round_sync.violations;
            row.slots_completed = r.slots_completed;
            row.final_len = r.chain.final_len;
            row.realized_eta = r.delivery.realized_eta;
            row.divergence = r.divergence;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn sweep_csv(axis: &str, rows: &[SweepRow]) -> String {
    let header = [axis, "outcome", "violations", "slots_completed", "final_len", "realized_eta", "divergence", "error"];
    let mut out = vec![header.iter().map(|h| h.to_string()).collect()];
    for r in rows {
        let value = match &r.value {
            Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        out.push(vec![
            value,
            r.outcome.map_or(String::new(), |o| format!("{o:?}").to_lowercase()),
            r.violations.to_string(),
            r.slots_completed.to_string(),
            r.final_len.to_string(),
            r.realized_eta.map_or(String::new(), |e| format!("{e:.6}")),
            r.divergence.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    csv_string(out)
}

/// One line of a bounds parameter file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    #[serde(flatten)]
    pub params: BoundParams,
    pub k: f64,
    pub s: f64,
}

/// Accepts a single row object or an array of rows.
pub fn parse_bounds(text: &str) -> Result<Vec<BoundsRow>, ConfigError> {
    let v: Value = serde_json::from_str(text)?;
    Ok(match v {
        Value::Array(_) => serde_json::from_value(v)?,
        _ => vec![serde_json::from_value(v)?],
    })
}

pub fn bound_tables(rows: &[BoundsRow]) -> Vec<BoundTable> {
    rows.iter()
        .map(|r| BoundTable::compute(r.params.clone(), r.k, r.s))
        .collect()
}

/// Wide CSV: parameters, one column per calculator, and a `flags` column
/// naming every calculator that refused the row.
pub fn bounds_csv(tables: &[BoundTable]) -> String {
    let names: Vec<String> = tables
        .first()
        .map(|t| t.rows.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["f", "eta", "beta", "eps", "alpha", "r", "l", "q", "k", "s"]
        .iter()
        .map(|h| h.to_string())
        .collect();
    header.extend(names);
    header.push("flags".into());
    let mut out = vec![header];
    for t in tables {
        let p = &t.params;
        let mut row: Vec<String> = [p.f, p.eta, p.beta, p.eps]
            .iter()
            .map(f64::to_string)
            .collect();
        row.push(p.alpha.map_or(String::new(), |a| a.to_string()));
        row.extend([p.r, p.l, p.q, t.k, t.s].iter().map(f64::to_string));
        let mut flags = Vec::new();
        for (name, v) in &t.rows {
            match v {
                Ok(x) => row.push(format!("{x:e}")),
                Err(e) => {
                    row.push(String::new());
                    flags.push(format!("{name}: {e}"));
                }
            }
        }
        row.push(flags.join("; "));
        out.push(row);
    }
    csv_string(out)
}
