//! Kernel contextual bandits for simple-regret minimization.
//!
//! The exploration phase learns one kernel ridge regressor per arm while a
//! policy decides which arm to pull for each context; the exploitation phase
//! recommends an arm per context without further feedback and is scored by
//! simple regret. [`policies`] implements Contextual-Gap together with five
//! baselines, [`harness`] runs budget sweeps and tuning, and [`diagnostics`]
//! checks the confidence-interval and eigenvalue bounds empirically.

pub mod confidence;
pub mod diagnostics;
pub mod environments;
pub mod error;
pub mod exec;
pub mod harness;
pub mod kernel;
pub mod policies;

pub use confidence::{confidence_interval, gap_indices, hardness, ConfidenceBundle, ConfidenceParams, GapDecision};
pub use environments::{simple_regret, EnvKind, EnvSpec, EnvStep, Environment};
pub use error::{Error, Result};
pub use exec::Execution;
pub use kernel::{eval_kernel, ArmState, Context, KernelFamily, KernelSpec, Posterior};
pub use policies::{Bandit, BanditState, PolicyConfig, PolicyKind};

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version of the behavioural contract (file formats, CLI, defaults).
pub const SPEC_VERSION: &str = "1.0";
