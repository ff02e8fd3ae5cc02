//! Monte Carlo checks of the confidence-interval and eigenvalue bounds.
//!
//! Every check is seeded; trial `i` draws from `derive_seed(seed, [i])`, so
//! reports are reproducible and independent of the execution mode.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::confidence::{confidence_interval, ConfidenceParams};
use crate::environments::{EnvKind, EnvSpec, Environment};
use crate::error::{invalid, Result};
use crate::exec::{derive_seed, Execution};
use crate::harness::g_bound;
use crate::kernel::{ArmState, KernelSpec};
use crate::policies::{Bandit, PolicyConfig, PolicyKind};

/// Eigenvalue floor of the unit-circle second moment `E[xxᵀ] = I/2`.
pub const UNIT_CIRCLE_LAMBDA_X: f64 = 0.5;
/// Effective dimension of the unit-circle contexts.
pub const UNIT_CIRCLE_D_STAR: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub violated: bool,
    /// Check-specific worst-case statistic of the trial (ratio to the bound).
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub nominal_rate: f64,
    pub slack: f64,
    /// Binomial standard error of `violation_rate`.
    pub std_error: f64,
    pub pass: bool,
    /// Theoretical constants and auxiliary measurements.
    pub constants: BTreeMap<String, f64>,
    pub details: Vec<TrialRecord>,
}

impl DiagnosticReport {
    fn from_trials(
        name: &str,
        seed: u64,
        nominal_rate: f64,
        slack: f64,
        details: Vec<TrialRecord>,
        constants: BTreeMap<String, f64>,
    ) -> Self {
        let trials = details.len();
        let violations = details.iter().filter(|d| d.violated).count();
        let rate = if trials == 0 { 0.0 } else { violations as f64 / trials as f64 };
        let std_error = if trials == 0 {
            0.0
        } else {
            (rate * (1.0 - rate) / trials as f64).sqrt()
        };
        Self {
            name: name.to_string(),
            seed,
            trials,
            violations,
            violation_rate: rate,
            nominal_rate,
            slack,
            std_error,
            pass: rate <= nominal_rate + slack,
            constants,
            details,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `C2 = ρ √(ln det(I + K/λ)) + √λ ‖f‖_H` from a log-det capacity.
pub fn c2_from_capacity(capacity: f64, rho: f64, lambda: f64, f_norm_bound: f64) -> f64 {
    rho * capacity.max(0.0).sqrt() + lambda.sqrt() * f_norm_bound
}

/// `C2` for an arm's history.
pub fn c2_estimate(state: &ArmState, rho: f64, f_norm_bound: f64) -> f64 {
    c2_from_capacity(state.log_det_capacity(), rho, state.lambda(), f_norm_bound)
}

/// Streams `ln det(I + XᵀX/λ)` for a linear kernel in the primal
/// (`d × d`), which equals `ln det(I + K/λ)` of the Gram matrix.
#[derive(Debug, Clone)]
pub struct LinearCapacity {
    lambda: f64,
    second_moment: DMatrix<f64>,
    count: usize,
}

impl LinearCapacity {
    pub fn new(dims: usize, lambda: f64) -> Self {
        Self {
            lambda,
            second_moment: DMatrix::zeros(dims, dims),
            count: 0,
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.second_moment.nrows();
        for i in 0..d {
            for j in 0..d {
                self.second_moment[(i, j)] += x[i] * x[j];
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn log_det_capacity(&self) -> f64 {
        let d = self.second_moment.nrows();
        let m = DMatrix::identity(d, d) + &self.second_moment / self.lambda;
        m.cholesky().map_or(f64::NAN, |c| 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
    }
}

/// `N_λ = ⌈max(2(1−λ)/λ_x, d*, (256/λ_x²) ln(128 d̃ / (λ_x² δ)))⌉`.
pub fn theoretical_n_lambda(lambda: f64, lambda_x: f64, d_star: usize, d_tilde: f64, delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta <= 0.125) {
        return Err(invalid(format!("delta must lie in (0, 1/8], got {delta}")));
    }
    if !(lambda > 0.0 && lambda_x > 0.0 && d_tilde > 0.0) {
        return Err(invalid("lambda, lambda_x and d_tilde must be positive"));
    }
    let first = 2.0 * (1.0 - lambda) / lambda_x;
    let third = eigen_time_threshold(lambda_x, d_tilde, delta);
    Ok(first.max(d_star as f64).max(third).ceil() as u64)
}

/// Time after which `λ_r(S_t) ≥ tλ_x/2` holds w.p. `1 − δ`:
/// `(256/λ_x²) ln(128 d̃ / (λ_x² δ))`.
pub fn eigen_time_threshold(lambda_x: f64, d_tilde: f64, delta: f64) -> f64 {
    256.0 / (lambda_x * lambda_x) * (128.0 * d_tilde / (lambda_x * lambda_x * delta)).ln()
}

/// Settings of [`coverage_check`].
#[derive(Debug, Clone, Serialize)]
pub struct CoverageConfig {
    pub beta: f64,
    pub trials: usize,
    /// Observations per history.
    pub steps: usize,
    /// Noise standard deviation `ρ`.
    pub rho: f64,
    pub lambda: f64,
    pub bandwidth: f64,
    /// Kernel-expansion terms of each true function.
    pub centers: usize,
    /// Query grid size on `[0, 1]`, checked after every observation.
    pub grid_points: usize,
    /// Replace `C1β + C2` by a fixed `α`.
    pub alpha_override: Option<f64>,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            trials: 2000,
            steps: 40,
            rho: 0.1,
            lambda: 0.1,
            bandwidth: 0.2,
            centers: 5,
            grid_points: 25,
            alpha_override: None,
            seed: 0,
        }
    }
}

/// Checks `f(x) ∈ [L_t(x), U_t(x)]` simultaneously over all steps and a
/// query grid, with `α = C1β + C2`, `C1 = ρ√2` and `C2` from the history's
/// log-det capacity and the exact RKHS norm of `f`. Each trial draws a fresh
/// `f = Σ w_m k(·, z_m)` on `[0, 1]` and a noisy history. The nominal miss
/// rate is `e^{−β²}`; the check passes within a slack of 0.01.
pub fn coverage_check(cfg: &CoverageConfig, exec: Execution) -> Result<DiagnosticReport> {
    if cfg.trials == 0 || cfg.steps == 0 || cfg.centers == 0 {
        return Err(invalid("trials, steps and centers must be positive"));
    }
    if cfg.rho < 0.0 || cfg.beta <= 0.0 {
        return Err(invalid("rho must be non-negative and beta positive"));
    }
    let kernel = KernelSpec::gaussian(cfg.bandwidth)?;
    ConfidenceParams::new(1.0, cfg.lambda)?;
    let grid: Vec<f64> = (0..cfg.grid_points)
        .map(|i| (i as f64 + 0.5) / cfg.grid_points as f64)
        .collect();
    let outcomes = exec.map(cfg.trials, |trial| -> Result<(TrialRecord, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[trial as u64]));
        let centers: Vec<f64> = (0..cfg.centers).map(|_| rng.random::<f64>()).collect();
        let weights: Vec<f64> = (0..cfg.centers).map(|_| rng.sample(StandardNormal)).collect();
        let f = |x: f64| -> f64 {
            centers.iter().zip(&weights).map(|(z, w)| w * kernel.eval_raw(&[x], &[*z])).sum()
        };
        let mut norm_sq = 0.0;
        for (zi, wi) in centers.iter().zip(&weights) {
            for (zj, wj) in centers.iter().zip(&weights) {
                norm_sq += wi * wj * kernel.eval_raw(&[*zi], &[*zj]);
            }
        }
        let f_norm = norm_sq.max(0.0).sqrt();
        let xs: Vec<f64> = (0..cfg.steps).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| f(x) + cfg.rho * rng.sample::<f64, _>(StandardNormal))
            .collect();

        let mut state = ArmState::new(kernel, cfg.lambda)?;
        for (x, y) in xs.iter().zip(&ys) {
            state.update(&[*x], *y)?;
        }
        let c2 = c2_estimate(&state, cfg.rho, f_norm);
        let alpha = cfg.alpha_override.unwrap_or(cfg.rho * 2f64.sqrt() * cfg.beta + c2);
        let params = ConfidenceParams::new(alpha, cfg.lambda)?;

        let mut state = ArmState::new(kernel, cfg.lambda)?;
        let mut worst = 0.0f64;
        for t in 0..=cfg.steps {
            let probes = grid.iter().copied().chain(xs.get(t).copied());
            for q in probes {
                let b = confidence_interval(&state, &[q], &params)?;
                let half = b.width / 2.0;
                let err = (f(q) - b.mean).abs();
                let ratio = if half > 0.0 { err / half } else if err > 0.0 { f64::INFINITY } else { 0.0 };
                worst = worst.max(ratio);
            }
            if t < cfg.steps {
                state.update(&[xs[t]], ys[t])?;
            }
        }
        Ok((
            TrialRecord {
                trial,
                violated: worst > 1.0,
                statistic: worst,
            },
            alpha,
        ))
    });
    let mut details = Vec::with_capacity(cfg.trials);
    let mut alpha_sum = 0.0;
    for o in outcomes {
        let (rec, alpha) = o?;
        alpha_sum += alpha;
        details.push(rec);
    }
    let mut constants = BTreeMap::new();
    constants.insert("beta".into(), cfg.beta);
    constants.insert("c1".into(), cfg.rho * 2f64.sqrt());
    constants.insert("mean_alpha".into(), alpha_sum / cfg.trials as f64);
    Ok(DiagnosticReport::from_trials(
        "coverage",
        cfg.seed,
        (-cfg.beta * cfg.beta).exp(),
        0.01,
        details,
        constants,
    ))
}

/// Settings of [`eigen_lower_bound_check`].
#[derive(Debug, Clone, Serialize)]
pub struct EigenConfig {
    /// Eigenvalue rank `r` (1 = largest).
    pub rank: usize,
    /// Asserted bound is `factor · t · λ_x`; the lemma's form is `factor = 1/2`.
    pub factor: f64,
    /// First time step checked.
    pub t0: usize,
    pub t_max: usize,
    pub trials: usize,
    pub delta: f64,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            rank: 2,
            factor: 0.5,
            t0: 200,
            t_max: 1000,
            trials: 1000,
            delta: 0.1,
            seed: 0,
        }
    }
}

/// Tracks `λ_r(S_t)` of `S_t = Σ_{s≤t} x_s x_sᵀ` on unit-circle contexts and
/// counts trials where `λ_r(S_t) < factor · t λ_x` for some `t ∈ [t0, t_max]`.
/// Also records the worst trace-identity error, the smallest eigenvalue seen
/// and whether `λ_1(S_t)` ever decreased. The lemma's own time threshold is
/// reported under `theoretical_t0`.
pub fn eigen_lower_bound_check(cfg: &EigenConfig, exec: Execution) -> Result<DiagnosticReport> {
    let d = UNIT_CIRCLE_D_STAR;
    if cfg.rank < 1 || cfg.rank > d {
        return Err(invalid(format!("rank must lie in 1..={d}")));
    }
    if cfg.t0 < 1 || cfg.t0 > cfg.t_max || cfg.trials == 0 {
        return Err(invalid("need 1 <= t0 <= t_max and trials > 0"));
    }
    let spec = EnvSpec::new(EnvKind::UnitCircle, 2);
    let lx = UNIT_CIRCLE_LAMBDA_X;
    let outcomes = exec.map(cfg.trials, |trial| -> Result<(TrialRecord, f64, f64, bool)> {
        let mut env = Environment::new(&spec, derive_seed(cfg.seed, &[trial as u64]))?;
        let mut s = DMatrix::<f64>::zeros(d, d);
        let mut sq_norms = 0.0;
        let mut trace_err = 0.0f64;
        let mut min_ev = f64::INFINITY;
        let mut prev_top = 0.0;
        let mut top_monotone = true;
        let mut worst = 0.0f64;
        for t in 1..=cfg.t_max {
            let step = env.next_step()?;
            let x = step.context.as_slice();
            for i in 0..d {
                for j in 0..d {
                    s[(i, j)] += x[i] * x[j];
                }
            }
            sq_norms += x.iter().map(|v| v * v).sum::<f64>();
            let mut ev: Vec<f64> = SymmetricEigen::new(s.clone()).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            trace_err = trace_err.max((ev.iter().sum::<f64>() - sq_norms).abs());
            min_ev = min_ev.min(ev[d - 1]);
            if ev[0] < prev_top - 1e-9 {
                top_monotone = false;
            }
            prev_top = ev[0];
            if t >= cfg.t0 {
                let bound = cfg.factor * t as f64 * lx;
                worst = worst.max(bound / ev[cfg.rank - 1]);
            }
        }
        Ok((
            TrialRecord {
                trial,
                violated: worst > 1.0,
                statistic: worst,
            },
            trace_err,
            min_ev,
            top_monotone,
        ))
    });
    let mut details = Vec::new();
    let mut trace_err = 0.0f64;
    let mut min_ev = f64::INFINITY;
    let mut monotone = true;
    for o in outcomes {
        let (rec, te, me, mono) = o?;
        trace_err = trace_err.max(te);
        min_ev = min_ev.min(me);
        monotone &= mono;
        details.push(rec);
    }
    let d_tilde = 50.0 * d as f64;
    let mut constants = BTreeMap::new();
    constants.insert("lambda_x".into(), lx);
    constants.insert("d_star".into(), d as f64);
    constants.insert("d_tilde".into(), d_tilde);
    constants.insert("theoretical_t0".into(), eigen_time_threshold(lx, d_tilde, cfg.delta));
    constants.insert("max_trace_error".into(), trace_err);
    constants.insert("min_eigenvalue".into(), min_ev);
    constants.insert("top_eigenvalue_monotone".into(), if monotone { 1.0 } else { 0.0 });
    let name = format!("eigen_rank{}", cfg.rank);
    Ok(DiagnosticReport::from_trials(&name, cfg.seed, cfg.delta, 0.0, details, constants))
}

/// Settings of [`c2_growth_check`].
#[derive(Debug, Clone, Serialize)]
pub struct C2GrowthConfig {
    pub trials: usize,
    /// Checkpoints run over `10, 20, 50, 100, ...` up to this budget.
    pub t_max: usize,
    pub rho: f64,
    pub lambda: f64,
    /// Largest accepted relative deviation from the fitted `c √ln T`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for C2GrowthConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            t_max: 10_000,
            rho: 0.5,
            lambda: 1.0,
            tolerance: 0.1,
            seed: 0,
        }
    }
}

fn checkpoints(t_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    // √ln T is an asymptotic shape; below 100 steps the ln(1 + T/λ) offset dominates.
    let mut decade = 100;
    while decade <= t_max {
        for m in [1, 2, 5] {
            if m * decade <= t_max {
                out.push(m * decade);
            }
        }
        decade *= 10;
    }
    out
}

/// Fits `C2(T) = c √ln T` to the noise term of `C2` along unit-circle
/// streams, with `‖f‖ = 0` so only the log-det part remains. The capacity is
/// accumulated in the primal of the linear kernel, which equals the dual
/// log-det and stays cheap at `T = 10⁴`. A trial is a violation when any
/// checkpoint deviates from its fitted curve by more than `tolerance`.
pub fn c2_growth_check(cfg: &C2GrowthConfig, exec: Execution) -> Result<DiagnosticReport> {
    let points = checkpoints(cfg.t_max);
    if cfg.trials == 0 || points.len() < 2 {
        return Err(invalid("need trials > 0 and t_max >= 200"));
    }
    if !(cfg.rho > 0.0 && cfg.lambda > 0.0) {
        return Err(invalid("rho and lambda must be positive"));
    }
    let spec = EnvSpec::new(EnvKind::UnitCircle, 2);
    let outcomes = exec.map(cfg.trials, |trial| -> Result<(TrialRecord, f64)> {
        let mut env = Environment::new(&spec, derive_seed(cfg.seed, &[trial as u64]))?;
        let mut cap = LinearCapacity::new(UNIT_CIRCLE_D_STAR, cfg.lambda);
        let mut samples = Vec::with_capacity(points.len());
        for &t in &points {
            while cap.count() < t {
                cap.push(env.next_step()?.context.as_slice());
            }
            samples.push(((t as f64).ln().sqrt(), c2_from_capacity(cap.log_det_capacity(), cfg.rho, cfg.lambda, 0.0)));
        }
        // Least squares through the origin.
        let c = samples.iter().map(|(u, v)| u * v).sum::<f64>() / samples.iter().map(|(u, _)| u * u).sum::<f64>();
        let worst = samples.iter().map(|(u, v)| (v / (c * u) - 1.0).abs()).fold(0.0, f64::max);
        Ok((
            TrialRecord {
                trial,
                violated: worst > cfg.tolerance,
                statistic: worst,
            },
            c,
        ))
    });
    let mut details = Vec::new();
    let mut c_sum = 0.0;
    for o in outcomes {
        let (rec, c) = o?;
        c_sum += c;
        details.push(rec);
    }
    let mut constants = BTreeMap::new();
    constants.insert("rho".into(), cfg.rho);
    constants.insert("lambda".into(), cfg.lambda);
    constants.insert("mean_fitted_c".into(), c_sum / cfg.trials as f64);
    constants.insert("tolerance".into(), cfg.tolerance);
    Ok(DiagnosticReport::from_trials("c2_growth", cfg.seed, 0.0, 0.0, details, constants))
}

/// Settings of [`width_bound_check`].
#[derive(Debug, Clone, Serialize)]
pub struct WidthConfig {
    pub runs: usize,
    pub budget: usize,
    pub arms: usize,
    pub lambda: f64,
    /// Theoretical `C1β + C2`, also used as the policy's `α`.
    pub alpha: f64,
    pub delta: f64,
    pub noise_sigma: f64,
    /// Policy generating the trace.
    pub policy: PolicyKind,
    /// Steps with `N_a ≤ min_pulls` are not checked. Defaults to the first
    /// two terms of `N_λ`, since the third is far beyond desk-scale budgets.
    pub min_pulls: Option<usize>,
    pub seed: u64,
}

impl Default for WidthConfig {
    fn default() -> Self {
        Self {
            runs: 200,
            budget: 2000,
            arms: 3,
            lambda: 1.0,
            alpha: 1.0,
            delta: 0.125,
            noise_sigma: 0.0,
            policy: PolicyKind::Uniform,
            min_pulls: None,
            seed: 0,
        }
    }
}

/// Runs a policy on the unit-circle environment with a linear kernel and
/// checks `s_{a,t}(x_t)² ≤ g(N_{a,t})` for the pulled arm at every step past
/// the pull threshold. A run is a violation if any checked step fails.
pub fn width_bound_check(cfg: &WidthConfig, exec: Execution) -> Result<DiagnosticReport> {
    if cfg.runs == 0 {
        return Err(invalid("runs must be positive"));
    }
    let lx = UNIT_CIRCLE_LAMBDA_X;
    let d_star = UNIT_CIRCLE_D_STAR;
    let practical = (2.0 * (1.0 - cfg.lambda) / lx).max(d_star as f64).ceil() as usize;
    let min_pulls = cfg.min_pulls.unwrap_or(practical);
    let mut spec = EnvSpec::new(EnvKind::UnitCircle, cfg.arms);
    spec.noise_sigma = cfg.noise_sigma;
    spec.seed = cfg.seed;
    let pcfg = PolicyConfig {
        seed: 0,
        ..PolicyConfig::new(cfg.arms, KernelSpec::linear(1.0)?, ConfidenceParams::new(cfg.alpha, cfg.lambda)?)
    };
    pcfg.validate()?;
    let outcomes = exec.map(cfg.runs, |run| -> Result<(TrialRecord, bool)> {
        let seed = derive_seed(cfg.seed, &[run as u64]);
        let mut env = Environment::new(&spec, seed)?;
        let mut bandit = Bandit::new(cfg.policy, PolicyConfig { seed, ..pcfg.clone() })?;
        let mut worst = 0.0f64;
        let mut g_monotone = true;
        for _ in 0..cfg.budget {
            let step = env.next_step()?;
            let x = step.context.as_slice();
            let arm = bandit.select(x)?;
            let n = bandit.state().pull_counts()[arm];
            if n > min_pulls {
                let b = confidence_interval(bandit.state().arm(arm), x, &pcfg.params)?;
                let g = g_bound(n as f64, cfg.alpha, cfg.lambda, lx);
                g_monotone &= g_bound(n as f64 + 1.0, cfg.alpha, cfg.lambda, lx) < g;
                worst = worst.max(b.width * b.width / g);
            }
            bandit.observe(x, arm, step.realized_rewards[arm])?;
        }
        Ok((
            TrialRecord {
                trial: run,
                violated: worst > 1.0,
                statistic: worst,
            },
            g_monotone,
        ))
    });
    let mut details = Vec::new();
    let mut monotone = true;
    for o in outcomes {
        let (rec, m) = o?;
        monotone &= m;
        details.push(rec);
    }
    let mut constants = BTreeMap::new();
    constants.insert("lambda_x".into(), lx);
    constants.insert("min_pulls".into(), min_pulls as f64);
    constants.insert("g_monotone".into(), if monotone { 1.0 } else { 0.0 });
    constants.insert(
        "theoretical_n_lambda".into(),
        theoretical_n_lambda(cfg.lambda, lx, d_star, 50.0 * d_star as f64, cfg.delta)? as f64,
    );
    Ok(DiagnosticReport::from_trials("width_bound", cfg.seed, cfg.delta, 0.05, details, constants))
}
