use crate::environments::EnvSpec;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::policies::Bandit;

use super::config::{ExperimentConfig, PolicySettings, TuningGrid};
use super::run::{evaluate, policy_seed, run_exploration, Streams, SALT_HOLDOUT};

/// Best grid point found for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedPolicy {
    pub settings: PolicySettings,
    /// Mean hold-out average simple regret of the chosen point.
    pub score: f64,
    pub grid_size: usize,
}

/// Grid search on hold-out streams.
///
/// Every grid point of every policy runs `grid.replications` explorations of
/// `grid.budget` steps on `ho_env` and is scored by its mean average simple
/// regret. The lowest score wins; ties go to the earlier grid point. Points
/// whose runs fail are skipped.
pub fn grid_search(
    ho_env: &EnvSpec,
    policies: &[PolicySettings],
    grid: &TuningGrid,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TunedPolicy>> {
    let streams: Vec<Streams> = (0..grid.replications)
        .map(|r| Streams::build(ho_env, seed, SALT_HOLDOUT, r, grid.budget, grid.eval_size))
        .collect::<Result<_>>()?;
    let points: Vec<Vec<PolicySettings>> = policies.iter().map(|p| grid.points(p)).collect();
    let mut tasks = Vec::new();
    for (p, pts) in points.iter().enumerate() {
        for i in 0..pts.len() {
            for r in 0..grid.replications {
                tasks.push((p, i, r));
            }
        }
    }
    let scores = exec.map(tasks.len(), |t| -> Result<f64> {
        let (p, i, r) = tasks[t];
        let settings = &points[p][i];
        let mut env = streams[r].explore_env()?;
        let pseed = policy_seed(seed, SALT_HOLDOUT, &settings.label(), r);
        let mut bandit = Bandit::new(settings.kind, settings.policy_config(env.arms(), pseed)?)?;
        run_exploration(&mut bandit, &mut env, grid.budget)?;
        Ok(evaluate(&bandit, &streams[r].eval)?.avg)
    });

    let mut totals: Vec<Vec<Option<f64>>> = points.iter().map(|pts| vec![Some(0.0); pts.len()]).collect();
    for ((p, i, _), s) in tasks.iter().zip(scores) {
        let slot = &mut totals[*p][*i];
        match s {
            Ok(v) => {
                if let Some(acc) = slot {
                    *acc += v;
                }
            }
            Err(e) => {
                log::warn!("grid point {i} of {} failed: {e}", policies[*p].label());
                *slot = None;
            }
        }
    }

    policies
        .iter()
        .enumerate()
        .map(|(p, base)| {
            let mut best: Option<(usize, f64)> = None;
            for (i, total) in totals[p].iter().enumerate() {
                if let Some(t) = total {
                    let score = t / grid.replications as f64;
                    if best.is_none_or(|(_, b)| score < b) {
                        best = Some((i, score));
                    }
                }
            }
            let (i, score) =
                best.ok_or_else(|| Error::Config(format!("every grid point failed for {}", base.label())))?;
            Ok(TunedPolicy {
                settings: points[p][i].clone(),
                score,
                grid_size: points[p].len(),
            })
        })
        .collect()
}

/// Runs the configured grid search and returns the experiment with the tuned
/// policies substituted, unchanged otherwise.
pub fn tune_experiment(config: &ExperimentConfig, exec: Execution) -> Result<(ExperimentConfig, Vec<TunedPolicy>)> {
    config.validate()?;
    let grid = config
        .tuning
        .as_ref()
        .ok_or_else(|| Error::Config("experiment has no [tuning] grid".into()))?;
    let ho_env = grid.env.as_ref().unwrap_or(&config.env);
    let tuned = grid_search(ho_env, &config.policies, grid, config.seed, exec)?;
    Ok((apply_tuning(config, &tuned), tuned))
}

/// Replaces each policy by its tuned settings.
pub fn apply_tuning(config: &ExperimentConfig, tuned: &[TunedPolicy]) -> ExperimentConfig {
    let mut out = config.clone();
    for t in tuned {
        if let Some(i) = out.policy_index(&t.settings.label()) {
            out.policies[i] = t.settings.clone();
        }
    }
    out
}
