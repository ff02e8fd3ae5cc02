//! Arm-selection policies for the exploration phase and their exploitation
//! (recommendation) rules.
//!
//! Every policy starts with the same context-free round-robin burn-in of
//! `burn_in` pulls per arm. After that:
//!
//! | policy            | exploration                          | exploitation   |
//! |-------------------|--------------------------------------|----------------|
//! | `contextual_gap`  | wider of `J`, `j`                    | `J` at `x`     |
//! | `uniform`         | round-robin                          | argmax `f̂`     |
//! | `epsilon_greedy`  | argmax `f̂` w.p. `1 − decayᵗ`         | argmax `f̂`     |
//! | `kernel_ucb`      | argmax `U`                           | argmax `U`     |
//! | `kernel_ucb_mod`  | argmax `U`                           | argmax `f̂`     |
//! | `kernel_ts`       | argmax of `N(f̂, (ν σ̂/√λ)²)` draws    | argmax `f̂`     |

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::confidence::{argmax_by, gap_indices, ConfidenceBundle, ConfidenceParams, GapDecision};
use crate::error::{invalid, Result};
use crate::kernel::{ArmState, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    ContextualGap,
    Uniform,
    EpsilonGreedy,
    KernelUcb,
    KernelUcbMod,
    KernelTs,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::ContextualGap,
        PolicyKind::Uniform,
        PolicyKind::EpsilonGreedy,
        PolicyKind::KernelUcb,
        PolicyKind::KernelUcbMod,
        PolicyKind::KernelTs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::ContextualGap => "contextual_gap",
            PolicyKind::Uniform => "uniform",
            PolicyKind::EpsilonGreedy => "epsilon_greedy",
            PolicyKind::KernelUcb => "kernel_ucb",
            PolicyKind::KernelUcbMod => "kernel_ucb_mod",
            PolicyKind::KernelTs => "kernel_ts",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown policy kind `{s}`")))
    }
}

/// Runtime configuration of one policy instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub arms: usize,
    pub kernel: KernelSpec,
    pub params: ConfidenceParams,
    /// Round-robin pulls per arm before any policy logic (`N_λ`).
    pub burn_in: usize,
    /// Number of estimator snapshots consulted when recommending.
    pub history_window: usize,
    pub epsilon_decay: f64,
    pub ts_scale: f64,
    pub seed: u64,
}

impl PolicyConfig {
    pub fn new(arms: usize, kernel: KernelSpec, params: ConfidenceParams) -> Self {
        Self {
            arms,
            kernel,
            params,
            burn_in: 1,
            history_window: 1,
            epsilon_decay: 0.99,
            ts_scale: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms < 2 {
            return Err(invalid(format!("need at least 2 arms, got {}", self.arms)));
        }
        self.kernel.validate()?;
        self.params.validate()?;
        if self.burn_in < 1 {
            return Err(invalid("burn_in must be at least 1"));
        }
        if self.history_window < 1 {
            return Err(invalid("history_window must be at least 1"));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return Err(invalid(format!(
                "epsilon_decay must lie in (0, 1), got {}",
                self.epsilon_decay
            )));
        }
        if !(self.ts_scale.is_finite() && self.ts_scale > 0.0) {
            return Err(invalid(format!(
                "ts_scale must be positive, got {}",
                self.ts_scale
            )));
        }
        Ok(())
    }

    pub fn burn_in_steps(&self) -> usize {
        self.arms * self.burn_in
    }
}

/// Learning state shared by all policies.
///
/// Arms sit behind `Arc` so that a snapshot of all estimators costs `A`
/// pointer copies; an update then clones only the arm it touches while older
/// snapshots still hold it. With a window of `W` the retained snapshots cost
/// up to `W − 1` extra copies of the most recently updated arms.
#[derive(Debug, Clone)]
pub struct BanditState {
    arms: Vec<Arc<ArmState>>,
    t: usize,
    pull_counts: Vec<usize>,
    snapshots: VecDeque<Vec<Arc<ArmState>>>,
}

impl BanditState {
    pub fn new(cfg: &PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        let arm = Arc::new(ArmState::new(cfg.kernel, cfg.params.lambda)?);
        Ok(Self {
            arms: vec![arm; cfg.arms],
            t: 0,
            pull_counts: vec![0; cfg.arms],
            snapshots: VecDeque::new(),
        })
    }

    /// Exploration steps taken so far.
    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn pull_counts(&self) -> &[usize] {
        &self.pull_counts
    }

    pub fn arm(&self, a: usize) -> &ArmState {
        &self.arms[a]
    }

    pub fn arms(&self) -> impl Iterator<Item = &ArmState> + '_ {
        self.arms.iter().map(|a| a.as_ref())
    }

    /// Earlier estimator snapshots, oldest first.
    pub fn snapshot_count(&self) -> usize {
        self.snapshots.len()
    }

    /// Records the reward of `arm` at `x`.
    pub fn observe(&mut self, cfg: &PolicyConfig, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        if arm >= self.arms.len() {
            return Err(invalid(format!("arm {arm} out of range")));
        }
        let keep = cfg.history_window - 1;
        let pre = (keep > 0 && self.t >= cfg.burn_in_steps()).then(|| self.arms.clone());
        Arc::make_mut(&mut self.arms[arm]).update(x, reward)?;
        if let Some(pre) = pre {
            self.snapshots.push_back(pre);
            while self.snapshots.len() > keep {
                self.snapshots.pop_front();
            }
        }
        self.t += 1;
        self.pull_counts[arm] += 1;
        Ok(())
    }

    /// Replaces the snapshot window; used to build recommendation scenarios
    /// from hand-made estimators.
    pub fn with_history(arms: Vec<ArmState>, earlier: Vec<Vec<ArmState>>) -> Self {
        let n = arms.len();
        let wrap = |v: Vec<ArmState>| v.into_iter().map(Arc::new).collect::<Vec<_>>();
        Self {
            arms: wrap(arms),
            t: 0,
            pull_counts: vec![0; n],
            snapshots: earlier.into_iter().map(wrap).collect(),
        }
    }

    /// A hash-free fingerprint of the learning state, for side-effect checks.
    pub fn fingerprint(&self) -> (usize, Vec<usize>, Vec<u64>) {
        let bits = self
            .arms
            .iter()
            .flat_map(|a| {
                a.dual_weights()
                    .iter()
                    .chain(a.inverse())
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            })
            .collect();
        (self.t, self.pull_counts.clone(), bits)
    }
}

fn bundles_for(arms: &[Arc<ArmState>], x: &[f64], params: &ConfidenceParams) -> Result<Vec<ConfidenceBundle>> {
    arms.iter()
        .map(|a| Ok(ConfidenceBundle::from_posterior(a.posterior(x)?, params)))
        .collect()
}

/// Confidence bundles of every arm at `x` from the current estimators.
pub fn arm_bundles(state: &BanditState, x: &[f64], cfg: &PolicyConfig) -> Result<Vec<ConfidenceBundle>> {
    bundles_for(&state.arms, x, &cfg.params)
}

fn burn_in_arm(state: &BanditState, cfg: &PolicyConfig) -> Option<usize> {
    (state.t < cfg.burn_in_steps()).then(|| state.t % cfg.arms)
}

/// Contextual-Gap's choice among precomputed bundles.
pub fn contextual_gap_choice(bundles: &[ConfidenceBundle]) -> Result<GapDecision> {
    let mut d = gap_indices(bundles)?;
    d.choose_widest();
    Ok(d)
}

/// One exploration step of Contextual-Gap. Burn-in steps return no decision.
pub fn select_contextual_gap(
    state: &BanditState,
    x: &[f64],
    cfg: &PolicyConfig,
) -> Result<(usize, Option<GapDecision>)> {
    if let Some(a) = burn_in_arm(state, cfg) {
        return Ok((a, None));
    }
    let d = contextual_gap_choice(&arm_bundles(state, x, cfg)?)?;
    Ok((d.chosen.expect("chosen is set"), Some(d)))
}

/// Contextual-Gap's recommended arm at `x`.
///
/// With a window of 1 this is `J` of the current estimators. Otherwise `J` is
/// computed under each retained snapshot and under the current estimators,
/// and the candidate with the smallest `B_J` wins; ties favour the most
/// recent estimators.
pub fn recommend(state: &BanditState, x: &[f64], cfg: &PolicyConfig) -> Result<usize> {
    let current = gap_indices(&bundles_for(&state.arms, x, &cfg.params)?)?;
    let mut pick = current.best;
    let mut pick_gap = current.best_gap();
    let window = cfg.history_window.saturating_sub(1);
    for snap in state.snapshots.iter().rev().take(window) {
        let d = gap_indices(&bundles_for(snap, x, &cfg.params)?)?;
        if d.best_gap() < pick_gap {
            pick = d.best;
            pick_gap = d.best_gap();
        }
    }
    Ok(pick)
}

/// ε-greedy draw: greedy with probability `1 − ε`, otherwise uniform over
/// the remaining arms.
pub fn epsilon_greedy_choice<R: Rng + ?Sized>(means: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let greedy = argmax_by(means.len(), |a| means[a]);
    if rng.random::<f64>() >= epsilon {
        return greedy;
    }
    let other = rng.random_range(0..means.len() - 1);
    if other >= greedy {
        other + 1
    } else {
        other
    }
}

/// One exploration step of a baseline policy.
pub fn select_baseline<R: Rng + ?Sized>(
    kind: PolicyKind,
    state: &BanditState,
    x: &[f64],
    cfg: &PolicyConfig,
    rng: &mut R,
) -> Result<usize> {
    if kind == PolicyKind::ContextualGap {
        return Err(invalid("contextual_gap is not a baseline policy"));
    }
    if let Some(a) = burn_in_arm(state, cfg) {
        return Ok(a);
    }
    if kind == PolicyKind::Uniform {
        return Ok(state.t % cfg.arms);
    }
    let bundles = arm_bundles(state, x, cfg)?;
    let n = bundles.len();
    Ok(match kind {
        PolicyKind::EpsilonGreedy => {
            let step = (state.t + 1) as i32;
            let eps = cfg.epsilon_decay.powi(step);
            let means: Vec<f64> = bundles.iter().map(|b| b.mean).collect();
            epsilon_greedy_choice(&means, eps, rng)
        }
        PolicyKind::KernelUcb | PolicyKind::KernelUcbMod => argmax_by(n, |a| bundles[a].upper),
        PolicyKind::KernelTs => {
            let scale = cfg.ts_scale / cfg.params.lambda.sqrt();
            let draws: Vec<f64> = bundles
                .iter()
                .map(|b| {
                    let z: f64 = rng.sample(StandardNormal);
                    b.mean + scale * b.sigma * z
                })
                .collect();
            argmax_by(n, |a| draws[a])
        }
        PolicyKind::ContextualGap | PolicyKind::Uniform => unreachable!(),
    })
}

/// A policy bound to its configuration, learning state and random stream.
#[derive(Debug, Clone)]
pub struct Bandit {
    kind: PolicyKind,
    cfg: PolicyConfig,
    state: BanditState,
    rng: ChaCha8Rng,
}

impl Bandit {
    pub fn new(kind: PolicyKind, cfg: PolicyConfig) -> Result<Self> {
        let state = BanditState::new(&cfg)?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self {
            kind,
            cfg,
            state,
            rng,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn state(&self) -> &BanditState {
        &self.state
    }

    /// Chooses an arm to pull at `x` during exploration.
    pub fn select(&mut self, x: &[f64]) -> Result<usize> {
        match self.kind {
            PolicyKind::ContextualGap => Ok(select_contextual_gap(&self.state, x, &self.cfg)?.0),
            kind => select_baseline(kind, &self.state, x, &self.cfg, &mut self.rng),
        }
    }

    pub fn observe(&mut self, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        self.state.observe(&self.cfg, x, arm, reward)
    }

    /// Exploitation: the arm this policy recommends at `x`. Never mutates.
    pub fn recommend(&self, x: &[f64]) -> Result<usize> {
        match self.kind {
            PolicyKind::ContextualGap => recommend(&self.state, x, &self.cfg),
            PolicyKind::KernelUcb => {
                let b = arm_bundles(&self.state, x, &self.cfg)?;
                Ok(argmax_by(b.len(), |a| b[a].upper))
            }
            _ => {
                let b = arm_bundles(&self.state, x, &self.cfg)?;
                Ok(argmax_by(b.len(), |a| b[a].mean))
            }
        }
    }
}
