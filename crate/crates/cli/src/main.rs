//! `ctxgap`: run budget sweeps, tune policies, run the diagnostics, replay
//! logged cells and generate datasets.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! failures while running.

mod overrides;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use ctxgap::diagnostics::{
    c2_growth_check, coverage_check, eigen_lower_bound_check, width_bound_check, C2GrowthConfig, CoverageConfig,
    DiagnosticReport, EigenConfig, WidthConfig,
};
use ctxgap::environments::Dataset;
use ctxgap::harness::{budget_sweep, output_path, read_regret_csv, replay_cell, tune_experiment, ExperimentConfig};
use ctxgap::{EnvSpec, Environment, Error, Execution};

#[derive(Parser, Debug)]
#[command(name = "ctxgap", about = "Kernel contextual bandits for simple regret")]
struct Cli {
    /// Base seed; replaces the seed of the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and Monte Carlo checks (1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct ConfigArgs {
    /// Experiment file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set replications=5` or
    /// `--set policies.0.lambda=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every (policy, budget, replication) cell and write the report CSVs.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output prefix; defaults to `output` from the configuration.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Grid-search each policy on hold-out streams and write the tuned experiment.
    Tune {
        #[command(flatten)]
        config: ConfigArgs,
        /// Where to write the tuned experiment; defaults to `<output>_tuned.toml`.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a Monte Carlo check of the theory and write JSON reports.
    Diagnose {
        #[arg(value_enum)]
        check: Check,
        /// Confidence parameter of the coverage check.
        #[arg(long)]
        beta: Option<f64>,
        /// Trials (or runs) per check.
        #[arg(long)]
        trials: Option<usize>,
        /// Directory for `<check>.json`; reports go to stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Re-run one sweep cell and compare it with the logged report.
    Replay {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        policy: String,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        /// Logged regret CSV; defaults to `<output>.csv` when it exists.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write a dataset in the CSV exchange format from an environment.
    GenData {
        /// Environment file: an `[env]` table or a bare environment spec.
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Check {
    Coverage,
    Eigen,
    Width,
    C2,
    All,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn runtime(e: Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn config_err(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Reads the experiment, applies overrides and the global seed. The file
/// itself is never written.
fn load_experiment(args: &ConfigArgs, seed: Option<u64>) -> Outcome<ExperimentConfig> {
    let path = &args.config;
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let parsed: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut doc: toml::Table = toml::from_str(&parsed.to_toml_string().map_err(config_err)?).map_err(config_err)?;
    for raw in &args.sets {
        let (key, value) = overrides::parse(raw).map_err(Failure::Config)?;
        // `output` is the one optional scalar; it is absent when unset.
        if key == "output" {
            doc.entry("output").or_insert_with(|| toml::Value::String(String::new()));
        }
        overrides::apply(&mut doc, &key, value).map_err(Failure::Config)?;
    }
    let mut cfg = ExperimentConfig::from_toml_str(&doc.to_string())
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn output_prefix(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> Outcome<PathBuf> {
    flag.or_else(|| cfg.output.clone())
        .ok_or_else(|| Failure::Config("no output given: pass --output or set `output` in the config".into()))
}

fn sibling(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn write_text(path: &Path, body: &str) -> Outcome<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(e.into()))?;
    }
    fs::write(path, body).map_err(|e| runtime(e.into()))
}

fn sweep(cli: &Cli, config: &ConfigArgs, output: Option<PathBuf>, exec: Execution) -> Outcome<()> {
    let mut cfg = load_experiment(config, cli.seed)?;
    let prefix = output_prefix(output, &cfg)?;
    cfg.output = Some(prefix.clone());
    let report = budget_sweep(&cfg, exec).map_err(runtime)?;
    let mut written = report.write(&prefix).map_err(runtime)?;
    let effective = sibling(&prefix, "_config.toml");
    write_text(&effective, &cfg.to_toml_string().map_err(runtime)?)?;
    written.push(effective);
    if !cli.quiet {
        println!("{:<16} {:>6} {:>4} {:>12} {:>10} {:>12} {:>10}", "policy", "budget", "reps", "avg", "se", "worst", "se");
        for s in report.summarize() {
            println!(
                "{:<16} {:>6} {:>4} {:>12.6} {:>10.6} {:>12.6} {:>10.6}",
                s.policy, s.budget, s.replications, s.mean_avg, s.se_avg, s.mean_worst, s.se_worst
            );
        }
        for p in &written {
            println!("wrote {}", p.display());
        }
    }
    if !report.failures.is_empty() {
        log::warn!("{} cell(s) failed; see the _failures.csv report", report.failures.len());
    }
    Ok(())
}

fn tune(cli: &Cli, config: &ConfigArgs, output: Option<PathBuf>, exec: Execution) -> Outcome<()> {
    let cfg = load_experiment(config, cli.seed)?;
    if cfg.tuning.is_none() {
        return Err(Failure::Config("the experiment has no [tuning] table".into()));
    }
    let out = match output {
        Some(p) => p,
        None => sibling(&output_prefix(None, &cfg)?, "_tuned.toml"),
    };
    let (tuned_cfg, tuned) = tune_experiment(&cfg, exec).map_err(runtime)?;
    write_text(&out, &tuned_cfg.to_toml_string().map_err(runtime)?)?;
    if !cli.quiet {
        for t in &tuned {
            let s = &t.settings;
            println!(
                "{:<16} bandwidth={} lambda={} alpha={} epsilon_decay={} ts_scale={} hold-out regret={:.6} ({} points)",
                s.label(),
                s.kernel.bandwidth,
                s.lambda,
                s.alpha,
                s.epsilon_decay,
                s.ts_scale,
                t.score,
                t.grid_size
            );
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn diagnose(
    cli: &Cli,
    check: Check,
    beta: Option<f64>,
    trials: Option<usize>,
    output: Option<PathBuf>,
    exec: Execution,
) -> Outcome<()> {
    if beta.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
        return Err(Failure::Config("--beta must be positive".into()));
    }
    if trials == Some(0) {
        return Err(Failure::Config("--trials must be positive".into()));
    }
    let seed = cli.seed.unwrap_or(0);
    let checks: Vec<Check> = match check {
        Check::All => vec![Check::Coverage, Check::Eigen, Check::Width, Check::C2],
        c => vec![c],
    };
    let mut reports: Vec<DiagnosticReport> = Vec::new();
    for c in checks {
        let report = match c {
            Check::Coverage => {
                let d = CoverageConfig::default();
                let cfg = CoverageConfig {
                    beta: beta.unwrap_or(d.beta),
                    trials: trials.unwrap_or(d.trials),
                    seed,
                    ..d
                };
                coverage_check(&cfg, exec)
            }
            Check::Eigen => {
                let d = EigenConfig::default();
                let cfg = EigenConfig {
                    trials: trials.unwrap_or(d.trials),
                    seed,
                    ..d
                };
                eigen_lower_bound_check(&cfg, exec)
            }
            Check::Width => {
                let d = WidthConfig::default();
                let cfg = WidthConfig {
                    runs: trials.unwrap_or(d.runs),
                    seed,
                    ..d
                };
                width_bound_check(&cfg, exec)
            }
            Check::C2 => {
                let d = C2GrowthConfig::default();
                let cfg = C2GrowthConfig {
                    trials: trials.unwrap_or(d.trials),
                    seed,
                    ..d
                };
                c2_growth_check(&cfg, exec)
            }
            Check::All => unreachable!(),
        }
        .map_err(runtime)?;
        reports.push(report);
    }
    for r in &reports {
        match &output {
            Some(dir) => {
                let path = dir.join(format!("{}.json", r.name));
                write_text(&path, &r.to_json())?;
                if !cli.quiet {
                    println!("wrote {}", path.display());
                }
            }
            None => println!("{}", r.to_json()),
        }
        if !cli.quiet {
            eprintln!(
                "{}: {} / {} violations, rate {:.4} (nominal {:.4} + slack {:.2}) -> {}",
                r.name,
                r.violations,
                r.trials,
                r.violation_rate,
                r.nominal_rate,
                r.slack,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
    }
    Ok(())
}

fn replay(cli: &Cli, config: &ConfigArgs, policy: &str, budget: usize, rep: usize, log: Option<PathBuf>) -> Outcome<()> {
    let cfg = load_experiment(config, cli.seed)?;
    let cell = replay_cell(&cfg, policy, budget, rep).map_err(|e| match e {
        Error::Config(m) => Failure::Config(m),
        e => runtime(e),
    })?;
    println!(
        "{},{},{},{},{}",
        cell.policy, cell.budget, cell.replication, cell.avg_regret, cell.worst_regret
    );
    let log = log.or_else(|| cfg.output.as_ref().map(|p| output_path(p, "")).filter(|p| p.exists()));
    let Some(log) = log else {
        return Ok(());
    };
    let rows = read_regret_csv(&log).map_err(runtime)?;
    let row = rows
        .iter()
        .find(|r| r.policy == policy && r.budget == budget && r.replication == rep)
        .ok_or_else(|| Failure::Runtime(format!("{}: no logged cell {policy}/{budget}/{rep}", log.display())))?;
    let same = row.avg_regret.to_bits() == cell.avg_regret.to_bits()
        && row.worst_regret.to_bits() == cell.worst_regret.to_bits();
    if !same {
        return Err(Failure::Runtime(format!(
            "replay differs from {}: logged avg {} worst {}, replayed avg {} worst {}",
            log.display(),
            row.avg_regret,
            row.worst_regret,
            cell.avg_regret,
            cell.worst_regret
        )));
    }
    if !cli.quiet {
        eprintln!("matches {} bit for bit", log.display());
    }
    Ok(())
}

fn load_env(path: &Path) -> Outcome<EnvSpec> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let spec: EnvSpec = match table.get("env") {
        Some(env) => env.clone().try_into(),
        None => toml::Value::Table(table).try_into(),
    }
    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    spec.validate().map_err(config_err)?;
    Ok(spec)
}

fn gen_data(cli: &Cli, config: &Path, steps: usize, output: &Path) -> Outcome<()> {
    if steps == 0 {
        return Err(Failure::Config("--steps must be positive".into()));
    }
    let spec = load_env(config)?;
    let mut env = Environment::new(&spec, cli.seed.unwrap_or(0)).map_err(runtime)?;
    let rows = env.take_steps(steps).map_err(runtime)?;
    let data = Dataset {
        dims: env.dims(),
        arms: env.arms(),
        rows,
    };
    write_text(output, &data.to_csv_string())?;
    if !cli.quiet {
        println!("wrote {} rows to {}", steps, output.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome<()> {
    if cli.jobs == Some(0) {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    let exec = Execution::with_jobs(cli.jobs);
    match &cli.command {
        Command::Sweep { config, output } => sweep(cli, config, output.clone(), exec),
        Command::Tune { config, output } => tune(cli, config, output.clone(), exec),
        Command::Diagnose {
            check,
            beta,
            trials,
            output,
        } => diagnose(cli, *check, *beta, *trials, output.clone(), exec),
        Command::Replay {
            config,
            policy,
            budget,
            replication,
            log,
        } => replay(cli, config, policy, *budget, *replication, log.clone()),
        Command::GenData { config, steps, output } => gen_data(cli, config, *steps, output),
    }
}

fn main() -> ExitCode {
    let version: &'static str =
        Box::leak(format!("{} (spec {})", ctxgap::VERSION, ctxgap::SPEC_VERSION).into_boxed_str());
    let matches = match Cli::command().version(version).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "warn" } else { "info" }))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("configuration error: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
