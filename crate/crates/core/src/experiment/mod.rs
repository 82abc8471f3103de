//! Seeded Monte Carlo sweeps: clustering error against subspace correlation
//! (`fig1`), basic against block completion over sampling rates (`fig2`),
//! and a single written-out completion example (`fig3`).
//!
//! Trial `i` always draws from `SeedSpec::from_master(master_seed).child(i)`,
//! so shrinking the trial count keeps the surviving trials' records intact.

pub mod config;
pub mod fig1;
pub mod fig2;
pub mod table;

pub use config::{ExperimentConfig, ExperimentKind};
pub use fig1::run_fig1;
pub use fig2::{block_truth, completion_trial, run_fig2, run_fig3, Fig3Summary};
pub use table::{emit_results, GridSummary, ResultTable, TrialRecord};
