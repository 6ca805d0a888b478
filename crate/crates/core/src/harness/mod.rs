//! Scenario runner: configuration, the tick loop, reports, sweeps and the
//! canned figure scenarios.

mod figures;
mod report;
mod scenario;
mod sim;
mod sweep;

pub use report::{
    ChainSummary, Delivery, EpochRounds, LeaderRate, Outcome, RunOutput, RunReport, SyncReport, SCHEMA_VERSION,
};
pub use scenario::{Action, Admissibility, Checks, ConfigError, Event, Gate, ResolvedChecks, Scenario};
pub use figures::{describe_chain, figure, figure_with_runs, find_seed, scenario as figure_scenario, FigureId, FigureOutcome, FIG5_RUNS, FIG_ROUND};
pub use sweep::{bound_tables, bounds_csv, parse_bounds, parse_values, sweep, sweep_csv, BoundsRow, SweepRow};
pub use sim::{build_genesis, epoch_one_leaders, run, Simulation};

#[cfg(test)]
mod tests;
