//! Experiment orchestration: exploration runs, exploitation scoring, budget
//! sweeps, hold-out tuning and the closed-form bound calculators.

pub mod bounds;
mod config;
mod run;
mod sweep;
mod tuning;

pub use bounds::{compute_beta, g_bound, g_inverse, Beta, BetaInputs};
pub use config::{ExperimentConfig, PolicySettings, TuningGrid};
pub use run::{evaluate, run_exploration, RegretSummary, Streams};
pub use sweep::{
    budget_sweep, output_path, read_regret_csv, replay_cell, BudgetSummary, CellFailure, CellReport, RegretReport,
    RegretRow,
};
pub use tuning::{apply_tuning, grid_search, tune_experiment, TunedPolicy};
