use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceParams;
use crate::environments::EnvSpec;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::policies::{PolicyConfig, PolicyKind};

/// User-facing parameters of one policy in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySettings {
    pub kind: PolicyKind,
    /// Name used in reports; defaults to the kind name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one_usize")]
    pub burn_in: usize,
    #[serde(default = "one_usize")]
    pub history_window: usize,
    #[serde(default = "default_decay")]
    pub epsilon_decay: f64,
    #[serde(default = "one")]
    pub ts_scale: f64,
}

fn default_kernel() -> KernelSpec {
    KernelSpec::gaussian(1.0).expect("valid")
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_decay() -> f64 {
    0.99
}

impl PolicySettings {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            label: None,
            kernel: default_kernel(),
            lambda: 1.0,
            alpha: 1.0,
            burn_in: 1,
            history_window: 1,
            epsilon_decay: 0.99,
            ts_scale: 1.0,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn policy_config(&self, arms: usize, seed: u64) -> Result<PolicyConfig> {
        let cfg = PolicyConfig {
            arms,
            kernel: self.kernel,
            params: ConfidenceParams::new(self.alpha, self.lambda)?,
            burn_in: self.burn_in,
            history_window: self.history_window,
            epsilon_decay: self.epsilon_decay,
            ts_scale: self.ts_scale,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Hyper-parameter grid for hold-out tuning.
///
/// Every policy is tuned over `bandwidth × lambda`; the policy-specific
/// lists (`alpha` for the confidence-bound policies, `epsilon_decay`,
/// `ts_scale`) extend the grid only for the policies that use them and are
/// left at the policy's configured value when empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningGrid {
    pub bandwidth: Vec<f64>,
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub epsilon_decay: Vec<f64>,
    #[serde(default)]
    pub ts_scale: Vec<f64>,
    /// Exploration budget of the hold-out runs.
    pub budget: usize,
    pub eval_size: usize,
    #[serde(default = "one_usize")]
    pub replications: usize,
    /// Hold-out environment; defaults to the experiment environment with
    /// independent streams.
    #[serde(default)]
    pub env: Option<EnvSpec>,
}

impl TuningGrid {
    /// All grid points for a policy, in grid order (bandwidth outermost).
    pub fn points(&self, base: &PolicySettings) -> Vec<PolicySettings> {
        let or_base = |v: &[f64], b: f64| if v.is_empty() { vec![b] } else { v.to_vec() };
        let uses_alpha = matches!(
            base.kind,
            PolicyKind::ContextualGap | PolicyKind::KernelUcb | PolicyKind::KernelUcbMod
        );
        let alphas = if uses_alpha { or_base(&self.alpha, base.alpha) } else { vec![base.alpha] };
        let decays = if base.kind == PolicyKind::EpsilonGreedy {
            or_base(&self.epsilon_decay, base.epsilon_decay)
        } else {
            vec![base.epsilon_decay]
        };
        let scales = if base.kind == PolicyKind::KernelTs {
            or_base(&self.ts_scale, base.ts_scale)
        } else {
            vec![base.ts_scale]
        };
        let mut out = Vec::new();
        for &bw in &or_base(&self.bandwidth, base.kernel.bandwidth) {
            for &lambda in &or_base(&self.lambda, base.lambda) {
                for &alpha in &alphas {
                    for &epsilon_decay in &decays {
                        for &ts_scale in &scales {
                            let mut p = base.clone();
                            p.kernel.bandwidth = bw;
                            p.lambda = lambda;
                            p.alpha = alpha;
                            p.epsilon_decay = epsilon_decay;
                            p.ts_scale = ts_scale;
                            out.push(p);
                        }
                    }
                }
            }
        }
        out
    }
}

/// A budget sweep: policies × budgets × replications on one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub policies: Vec<PolicySettings>,
    pub budgets: Vec<usize>,
    pub eval_size: usize,
    #[serde(default = "one_usize")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output path prefix; reports go to `<output>.csv`, `<output>_hist.csv`, ...
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record wall-clock seconds per cell. Disable for byte-reproducible reports.
    #[serde(default = "yes")]
    pub timing: bool,
    #[serde(default)]
    pub tuning: Option<TuningGrid>,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Error::Config(m);
        self.env.validate()?;
        if self.policies.is_empty() {
            return Err(cfg_err("no policies configured".into()));
        }
        if self.budgets.is_empty() {
            return Err(cfg_err("no budgets configured".into()));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err(format!("budgets must be strictly increasing: {:?}", self.budgets)));
        }
        if self.replications < 1 {
            return Err(cfg_err("replications must be at least 1".into()));
        }
        if self.eval_size < 1 {
            return Err(cfg_err("eval_size must be at least 1".into()));
        }
        let mut labels: Vec<String> = self.policies.iter().map(PolicySettings::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(cfg_err("policy labels must be unique".into()));
        }
        for p in &self.policies {
            // Arm count of a csv env is only known after loading; 2 is a safe stand-in.
            let arms = self.env.arms.max(2);
            p.policy_config(arms, 0)?;
            let min = arms * p.burn_in + 1;
            if self.budgets[0] < min {
                return Err(cfg_err(format!(
                    "smallest budget {} is below A·N_λ + 1 = {min} for {}",
                    self.budgets[0],
                    p.label()
                )));
            }
        }
        if let Some(t) = &self.tuning {
            if t.budget < 1 || t.eval_size < 1 || t.replications < 1 {
                return Err(cfg_err("tuning budget, eval_size and replications must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn max_budget(&self) -> usize {
        *self.budgets.last().expect("validated non-empty")
    }

    pub fn policy_index(&self, label: &str) -> Option<usize> {
        self.policies.iter().position(|p| p.label() == label)
    }
}
