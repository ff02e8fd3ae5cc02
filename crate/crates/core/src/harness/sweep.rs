use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::policies::Bandit;

use super::config::{ExperimentConfig, PolicySettings};
use super::run::{evaluate, policy_seed, run_exploration, Streams};

/// Stream scope of sweep (evaluation-split) runs.
pub(crate) const SCOPE_SWEEP: u64 = 0x5_7ee9;

/// Result of one (policy, budget, replication) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub policy: String,
    pub budget: usize,
    pub replication: usize,
    pub avg_regret: f64,
    pub worst_regret: f64,
    /// Pulls per arm during exploration.
    pub pull_histogram: Vec<usize>,
    pub seconds: f64,
    pub policy_seed: u64,
    pub explore_seed: u64,
    pub eval_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub policy: String,
    pub budget: usize,
    pub replication: usize,
    pub error: String,
}

/// All cells of a sweep, sorted by (policy order, budget, replication).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretReport {
    pub rows: Vec<CellReport>,
    pub failures: Vec<CellFailure>,
}

/// Mean and standard error of the per-replication regrets of one
/// (policy, budget) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSummary {
    pub policy: String,
    pub budget: usize,
    pub replications: usize,
    pub mean_avg: f64,
    pub se_avg: f64,
    pub mean_worst: f64,
    pub se_worst: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl RegretReport {
    pub fn summarize(&self) -> Vec<BudgetSummary> {
        let mut keys: Vec<(String, usize)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|(p, b)| *p == r.policy && *b == r.budget) {
                keys.push((r.policy.clone(), r.budget));
            }
        }
        keys.into_iter()
            .map(|(policy, budget)| {
                let cells: Vec<&CellReport> =
                    self.rows.iter().filter(|r| r.policy == policy && r.budget == budget).collect();
                let avg: Vec<f64> = cells.iter().map(|c| c.avg_regret).collect();
                let worst: Vec<f64> = cells.iter().map(|c| c.worst_regret).collect();
                let (mean_avg, se_avg) = mean_se(&avg);
                let (mean_worst, se_worst) = mean_se(&worst);
                BudgetSummary {
                    policy,
                    budget,
                    replications: cells.len(),
                    mean_avg,
                    se_avg,
                    mean_worst,
                    se_worst,
                }
            })
            .collect()
    }

    pub fn summary(&self, policy: &str, budget: usize) -> Option<BudgetSummary> {
        self.summarize().into_iter().find(|s| s.policy == policy && s.budget == budget)
    }

    pub fn regret_csv(&self) -> String {
        let mut s = String::from("policy,budget,replication,avg_regret,worst_regret,seconds\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.policy, r.budget, r.replication, r.avg_regret, r.worst_regret, r.seconds
            )
            .expect("string write");
        }
        s
    }

    /// Pull histograms; arms are numbered from 1.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("policy,budget,replication,arm,pulls\n");
        for r in &self.rows {
            for (a, n) in r.pull_histogram.iter().enumerate() {
                writeln!(s, "{},{},{},{},{}", r.policy, r.budget, r.replication, a + 1, n).expect("string write");
            }
        }
        s
    }

    /// Seeds of every cell, for replay.
    pub fn cells_csv(&self) -> String {
        let mut s = String::from("policy,budget,replication,policy_seed,explore_seed,eval_seed\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.policy, r.budget, r.replication, r.policy_seed, r.explore_seed, r.eval_seed
            )
            .expect("string write");
        }
        s
    }

    pub fn failures_csv(&self) -> String {
        let mut s = String::from("policy,budget,replication,error\n");
        for f in &self.failures {
            writeln!(s, "{},{},{},\"{}\"", f.policy, f.budget, f.replication, f.error.replace('"', "'"))
                .expect("string write");
        }
        s
    }

    /// Writes `<prefix>.csv`, `<prefix>_hist.csv`, `<prefix>_cells.csv` and,
    /// when cells failed, `<prefix>_failures.csv`. Returns the written paths.
    pub fn write(&self, prefix: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut files = vec![
            (output_path(prefix, ""), self.regret_csv()),
            (output_path(prefix, "_hist"), self.histogram_csv()),
            (output_path(prefix, "_cells"), self.cells_csv()),
        ];
        if !self.failures.is_empty() {
            files.push((output_path(prefix, "_failures"), self.failures_csv()));
        }
        for (path, body) in &files {
            fs::write(path, body)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

/// `<prefix><suffix>.csv`
pub fn output_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    name.push(".csv");
    prefix.with_file_name(name)
}

/// A row of a regret CSV as written by [`RegretReport::write`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegretRow {
    pub policy: String,
    pub budget: usize,
    pub replication: usize,
    pub avg_regret: f64,
    pub worst_regret: f64,
    pub seconds: f64,
}

pub fn read_regret_csv(path: &Path) -> Result<Vec<RegretRow>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(perr(format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("`{s}`: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| perr(format!("`{s}`: {e}")));
        rows.push(RegretRow {
            policy: f[0].to_string(),
            budget: int(f[1])?,
            replication: int(f[2])?,
            avg_regret: num(f[3])?,
            worst_regret: num(f[4])?,
            seconds: num(f[5])?,
        });
    }
    Ok(rows)
}

fn run_cell(
    settings: &PolicySettings,
    streams: &Streams,
    budget: usize,
    seed: u64,
    rep: usize,
    timing: bool,
) -> Result<CellReport> {
    let label = settings.label();
    let started = Instant::now();
    let mut env = streams.explore_env()?;
    let pseed = policy_seed(seed, SCOPE_SWEEP, &label, rep);
    let mut bandit = Bandit::new(settings.kind, settings.policy_config(env.arms(), pseed)?)?;
    let hist = run_exploration(&mut bandit, &mut env, budget)?;
    let summary = evaluate(&bandit, &streams.eval)?;
    Ok(CellReport {
        policy: label,
        budget,
        replication: rep,
        avg_regret: summary.avg,
        worst_regret: summary.worst,
        pull_histogram: hist,
        seconds: if timing { started.elapsed().as_secs_f64() } else { 0.0 },
        policy_seed: pseed,
        explore_seed: streams.explore_seed,
        eval_seed: streams.eval_seed,
    })
}

/// Runs every (policy, budget, replication) cell of `config`.
///
/// Each replication has its own exploration stream and evaluation set,
/// shared by all policies and budgets. A failing cell is recorded in
/// [`RegretReport::failures`] and the sweep carries on.
pub fn budget_sweep(config: &ExperimentConfig, exec: Execution) -> Result<RegretReport> {
    config.validate()?;
    let streams: Vec<Streams> = (0..config.replications)
        .map(|r| Streams::build(&config.env, config.seed, SCOPE_SWEEP, r, config.max_budget(), config.eval_size))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for p in 0..config.policies.len() {
        for &b in &config.budgets {
            for r in 0..config.replications {
                cells.push((p, b, r));
            }
        }
    }
    let results = exec.map(cells.len(), |i| {
        let (p, b, r) = cells[i];
        run_cell(&config.policies[p], &streams[r], b, config.seed, r, config.timing)
    });

    let mut report = RegretReport::default();
    for ((p, b, r), res) in cells.into_iter().zip(results) {
        match res {
            Ok(row) => report.rows.push(row),
            Err(e) => {
                let policy = config.policies[p].label();
                log::warn!("cell {policy}/{b}/{r} failed: {e}");
                report.failures.push(CellFailure {
                    policy,
                    budget: b,
                    replication: r,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(report)
}

/// Re-runs a single sweep cell from the seeds derived for it.
pub fn replay_cell(config: &ExperimentConfig, policy: &str, budget: usize, replication: usize) -> Result<CellReport> {
    config.validate()?;
    let p = config
        .policy_index(policy)
        .ok_or_else(|| Error::Config(format!("no policy labelled `{policy}`")))?;
    if !config.budgets.contains(&budget) {
        return Err(Error::Config(format!("budget {budget} is not part of the sweep")));
    }
    if replication >= config.replications {
        return Err(Error::Config(format!("replication {replication} out of range")));
    }
    let streams = Streams::build(
        &config.env,
        config.seed,
        SCOPE_SWEEP,
        replication,
        config.max_budget(),
        config.eval_size,
    )?;
    run_cell(&config.policies[p], &streams, budget, config.seed, replication, config.timing)
}
