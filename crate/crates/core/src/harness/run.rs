use crate::environments::{simple_regret, EnvKind, EnvSpec, EnvStep, Environment};
use crate::error::{invalid, Error, Result};
use crate::exec::derive_seed;
use crate::policies::Bandit;

/// Average and worst-case simple regret over an evaluation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretSummary {
    pub avg: f64,
    pub worst: f64,
}

/// Runs `budget` exploration steps. The policy sees each context, picks an
/// arm and receives only that arm's realized reward. Returns pulls per arm.
pub fn run_exploration(bandit: &mut Bandit, env: &mut Environment, budget: usize) -> Result<Vec<usize>> {
    let cfg = bandit.config();
    if budget < cfg.burn_in_steps() {
        return Err(invalid(format!(
            "budget {budget} is shorter than the burn-in of {} steps",
            cfg.burn_in_steps()
        )));
    }
    if env.arms() != cfg.arms {
        return Err(invalid(format!(
            "environment has {} arms, policy expects {}",
            env.arms(),
            cfg.arms
        )));
    }
    for _ in 0..budget {
        let step = env.next_step()?;
        let x = step.context.as_slice();
        let arm = bandit.select(x)?;
        bandit.observe(x, arm, step.realized_rewards[arm])?;
    }
    Ok(bandit.state().pull_counts().to_vec())
}

/// Scores the policy's recommendations on `eval`. The bandit is borrowed
/// immutably: exploitation never changes the learning state.
pub fn evaluate(bandit: &Bandit, eval: &[EnvStep]) -> Result<RegretSummary> {
    if eval.is_empty() {
        return Err(invalid("evaluation set is empty"));
    }
    let mut sum = 0.0;
    let mut worst = 0.0f64;
    for step in eval {
        let r = simple_regret(step, bandit.recommend(step.context.as_slice())?)?;
        sum += r;
        worst = worst.max(r);
    }
    Ok(RegretSummary {
        avg: sum / eval.len() as f64,
        worst,
    })
}

pub(crate) const SALT_EXPLORE: u64 = 1;
pub(crate) const SALT_EVAL: u64 = 2;
pub(crate) const SALT_POLICY: u64 = 3;
pub(crate) const SALT_HOLDOUT: u64 = 4;

/// Exploration and evaluation streams of one replication.
#[derive(Debug, Clone)]
pub struct Streams {
    pub explore: EnvSpec,
    pub explore_seed: u64,
    pub eval_seed: u64,
    pub eval: Vec<EnvStep>,
}

impl Streams {
    /// Builds the streams of replication `rep`. `scope` separates families of
    /// streams (sweep vs hold-out) drawn from the same base seed.
    ///
    /// * i.i.d. generators: independent seeded streams for exploration and
    ///   evaluation.
    /// * `ar1_sensor`: a single trace; evaluation continues it after the
    ///   largest budget.
    /// * `csv`: the last `eval_size` rows of the configured window are held
    ///   out for evaluation; both parts are shuffled when `shuffle` is set.
    pub fn build(env: &EnvSpec, seed: u64, scope: u64, rep: usize, max_budget: usize, eval_size: usize) -> Result<Self> {
        let explore_seed = derive_seed(seed, &[scope, SALT_EXPLORE, rep as u64]);
        let eval_seed = derive_seed(seed, &[scope, SALT_EVAL, rep as u64]);
        let (explore, eval) = match env.kind {
            EnvKind::SyntheticSine | EnvKind::UnitCircle => {
                let eval = Environment::new(env, eval_seed)?.take_steps(eval_size)?;
                (env.clone(), eval)
            }
            EnvKind::Ar1Sensor => {
                let mut trace = Environment::new(env, explore_seed)?;
                for _ in 0..max_budget {
                    trace.next_step()?;
                }
                (env.clone(), trace.take_steps(eval_size)?)
            }
            EnvKind::Csv => {
                let probe = Environment::new(env, 0)?;
                let rows = probe.remaining().unwrap_or(0);
                if rows <= eval_size {
                    return Err(Error::Schema(format!(
                        "dataset window has {rows} rows, need more than eval_size = {eval_size}"
                    )));
                }
                let mut explore = env.clone();
                explore.take = Some(rows - eval_size);
                let mut held = env.clone();
                held.skip = env.skip + rows - eval_size;
                held.take = Some(eval_size);
                let eval = Environment::new(&held, eval_seed)?.take_steps(eval_size)?;
                (explore, eval)
            }
        };
        Ok(Self {
            explore,
            explore_seed,
            eval_seed,
            eval,
        })
    }

    pub fn explore_env(&self) -> Result<Environment> {
        Environment::new(&self.explore, self.explore_seed)
    }
}

/// Stable 64-bit FNV-1a of a label, used to key policy seeds by name.
pub(crate) fn label_key(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub(crate) fn policy_seed(seed: u64, scope: u64, label: &str, rep: usize) -> u64 {
    derive_seed(seed, &[scope, SALT_POLICY, label_key(label), rep as u64])
}
