//! Trace analytics.
//!
//! Everything here is a pure function of a loaded event list: outcome
//! classification, round and cost distributions, persistence ratios, exit
//! mix, discovery signal, severity counts, escalation statistics, evidence
//! artifacts, and milestone alignment. [`report::analyze`] bundles them
//! with the printed table rows; [`report::write_plots`] emits CSV/JSON
//! series for plotting elsewhere.

pub mod frac;
pub mod metrics;
pub mod milestones;
pub mod report;
pub mod synth;
pub mod view;

pub use frac::{Frac, Rounding};
pub use milestones::{milestone_alignment, MilestoneMatrix, MilestoneOracle, PredicateError, Status};
pub use report::{analyze, compare, AnalysisReport, Comparison};
