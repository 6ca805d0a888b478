use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use autosyn_core::harness::{self, ConfigError, FigureId, Scenario};
use clap::{Parser, Subcommand};

const EXIT_VIOLATION: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "autosyn", version, about = "Deterministic simulator for a self-synchronising proof-of-stake protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write report.json, trace.jsonl and metrics.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// One run per value of a scenario field; prints a CSV table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted path into the scenario, e.g. `eta` or `adversary.jitter`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a canned timing scenario and compare against its expected outcome.
    Figures {
        /// fig1..fig5, or `all`.
        #[arg(long, default_value = "all")]
        id: String,
        /// Write each figure's run files under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every bound calculator for the rows of a parameter file.
    Bounds {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failures that map to the configuration exit code.
fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.is::<ConfigError>() || c.is::<serde_json::Error>())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(config: &Path, seed: Option<u64>, out: &Path) -> Result<u8> {
    let mut sc = Scenario::load(config)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let output = harness::run(sc)?;
    output
        .write_to(out)
        .with_context(|| format!("writing outputs to {}", out.display()))?;
    let r = &output.report;
    let violations: u64 = r.properties.iter().map(|p| p.violations).sum::<u64>() + r.round_sync.violations;
    println!(
        "{:?}: {} slots, {} ticks, chain length {}, {} violations{}",
        r.outcome,
        r.slots_completed,
        r.ticks,
        r.chain.final_len,
        violations,
        r.halt_reason.as_deref().map(|h| format!(", halted: {h}")).unwrap_or_default()
    );
    Ok(r.outcome.exit_code() as u8)
}

fn sweep(config: &Path, axis: &str, values: &str, out: Option<&Path>) -> Result<u8> {
    let text = std::fs::read_to_string(config).map_err(ConfigError::from)?;
    let base: serde_json::Value = serde_json::from_str(&text)?;
    let rows = harness::sweep(&base, axis, &harness::parse_values(values))?;
    emit(&harness::sweep_csv(axis, &rows), out)?;
    let code = rows
        .iter()
        .map(|r| match (r.error.is_some(), r.outcome) {
            (true, _) => EXIT_CONFIG,
            (_, Some(o)) => o.exit_code() as u8,
            _ => 0,
        })
        .max()
        .unwrap_or(0);
    Ok(code)
}

fn figures(id: &str, out: Option<&Path>) -> Result<u8> {
    let ids: Vec<FigureId> = if id == "all" {
        FigureId::ALL.to_vec()
    } else {
        vec![id.parse()?]
    };
    let mut code = 0;
    for id in ids {
        let f = harness::figure(id)?;
        println!(
            "{} {id}: expected {} observed {} (seed {})",
            if f.pass { "ok  " } else { "FAIL" },
            f.expected,
            f.observed,
            f.seed
        );
        if let Some(dir) = out {
            let dir = dir.join(id.to_string());
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("report.json"), f.report.to_json())?;
            std::fs::write(dir.join("figure.json"), serde_json::to_string_pretty(&f)?)?;
        }
        if !f.pass {
            code = EXIT_VIOLATION;
        }
    }
    Ok(code)
}

fn bounds(params: &Path, out: Option<&Path>) -> Result<u8> {
    let text = std::fs::read_to_string(params).map_err(ConfigError::from)?;
    let rows = harness::parse_bounds(&text)?;
    emit(&harness::bounds_csv(&harness::bound_tables(&rows)), out)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, seed, out } => run(config, *seed, out),
        Command::Sweep { config, axis, values, out } => sweep(config, axis, values, out.as_deref()),
        Command::Figures { id, out } => figures(id, out.as_deref()),
        Command::Bounds { params, out } => bounds(params, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { EXIT_CONFIG } else { 1 })
        }
    }
}
