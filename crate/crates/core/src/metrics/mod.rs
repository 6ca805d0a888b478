//! Run analysis: characteristic strings, reductions, divergence, property
//! checkers, closed-form error bounds and empirical audits.

mod audit;
mod bounds;
mod charstring;
mod checkers;
mod divergence;

pub use audit::{reduction_case_audit, rate_audit, CaseAudit, CaseRow, RateAudit};
pub use bounds::{
    cp_epoch, cg_epoch, cq_epoch, ecq_epoch, honest_growth, BoundError, BoundParams, BoundTable,
};
pub use charstring::{bot_reduction, real_reduction, CharString, Symbol};
pub use checkers::{
    check_cg, check_cg2, check_cp, check_cq, check_ecq, BlockStore, CheckReport, Node, Snapshot, Violation,
};
pub use divergence::{divergence, divergence_brute_force, for_each_binary_string};
