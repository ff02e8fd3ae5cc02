use ctxgap::harness::{
    budget_sweep, evaluate, grid_search, read_regret_csv, replay_cell, run_exploration, tune_experiment,
    ExperimentConfig, PolicySettings, TuningGrid,
};
use ctxgap::{Bandit, EnvSpec, Environment, Error, Execution, KernelSpec, PolicyKind};

fn constant_env(offsets: [f64; 2]) -> EnvSpec {
    let mut spec = EnvSpec::synthetic_sine();
    spec.arms = 2;
    spec.offsets = Some(offsets.to_vec());
    spec.amplitude = 0.0;
    spec
}

fn settings(kind: PolicyKind, bw: f64, lambda: f64) -> PolicySettings {
    let mut s = PolicySettings::new(kind);
    s.kernel = KernelSpec::gaussian(bw).unwrap();
    s.lambda = lambda;
    s
}

fn small_config() -> ExperimentConfig {
    let mut env = EnvSpec::synthetic_sine();
    env.arms = 4;
    ExperimentConfig {
        env,
        policies: vec![
            settings(PolicyKind::ContextualGap, 0.3, 0.1),
            settings(PolicyKind::KernelTs, 0.3, 0.1),
            settings(PolicyKind::Uniform, 0.3, 0.1),
        ],
        budgets: vec![20, 60],
        eval_size: 40,
        replications: 2,
        seed: 42,
        output: None,
        timing: false,
        tuning: None,
    }
}

#[test]
fn uniform_splits_budget_evenly() {
    let cfg = settings(PolicyKind::Uniform, 1.0, 1.0).policy_config(5, 0).unwrap();
    let mut bandit = Bandit::new(PolicyKind::Uniform, cfg).unwrap();
    let mut spec = EnvSpec::synthetic_sine();
    spec.arms = 5;
    let mut env = Environment::new(&spec, 1).unwrap();
    assert_eq!(run_exploration(&mut bandit, &mut env, 15).unwrap(), vec![3; 5]);
}

#[test]
fn pure_burn_in() {
    let mut s = settings(PolicyKind::ContextualGap, 1.0, 1.0);
    s.burn_in = 4;
    let mut bandit = Bandit::new(s.kind, s.policy_config(6, 0).unwrap()).unwrap();
    let mut spec = EnvSpec::synthetic_sine();
    spec.arms = 6;
    let mut env = Environment::new(&spec, 1).unwrap();
    assert_eq!(run_exploration(&mut bandit, &mut env, 24).unwrap(), vec![4; 6]);

    let mut short = Bandit::new(s.kind, s.policy_config(6, 0).unwrap()).unwrap();
    assert!(matches!(run_exploration(&mut short, &mut env, 23), Err(Error::InvalidArgument(_))));
}

#[test]
fn evaluation_of_fixed_recommenders() {
    let env = constant_env([0.5, 0.0]);
    let eval = Environment::new(&env, 3).unwrap().take_steps(100).unwrap();
    let s = settings(PolicyKind::KernelUcbMod, 1.0, 1.0);
    let train = |r0: f64, r1: f64| {
        let mut b = Bandit::new(s.kind, s.policy_config(2, 0).unwrap()).unwrap();
        for i in 0..10 {
            let x = [i as f64 * 0.6];
            b.observe(&x, 0, r0).unwrap();
            b.observe(&x, 1, r1).unwrap();
        }
        b
    };
    let right = evaluate(&train(1.0, -1.0), &eval).unwrap();
    assert_eq!((right.avg, right.worst), (0.0, 0.0));
    let wrong = evaluate(&train(-1.0, 1.0), &eval).unwrap();
    assert!((wrong.avg - 0.5).abs() < 1e-12 && (wrong.worst - 0.5).abs() < 1e-12);
    assert!(evaluate(&train(1.0, 0.0), &[]).is_err());
}

#[test]
fn evaluation_leaves_state_untouched() {
    let mut spec = EnvSpec::synthetic_sine();
    spec.arms = 4;
    let s = settings(PolicyKind::ContextualGap, 0.3, 0.1);
    let mut bandit = Bandit::new(s.kind, s.policy_config(4, 5).unwrap()).unwrap();
    run_exploration(&mut bandit, &mut Environment::new(&spec, 1).unwrap(), 80).unwrap();
    let eval = Environment::new(&spec, 2).unwrap().take_steps(200).unwrap();
    let before = bandit.state().fingerprint();
    let a = evaluate(&bandit, &eval).unwrap();
    let b = evaluate(&bandit, &eval).unwrap();
    assert_eq!(a, b);
    assert_eq!(bandit.state().fingerprint(), before);
    assert!(a.avg <= a.worst);
}

#[test]
fn one_cell_sweep() {
    let mut cfg = small_config();
    cfg.policies.truncate(1);
    cfg.budgets = vec![30];
    cfg.replications = 1;
    let report = budget_sweep(&cfg, Execution::Sequential).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.failures.is_empty());
    assert_eq!(report.rows[0].pull_histogram.iter().sum::<usize>(), 30);
}

#[test]
fn sweep_rows_satisfy_report_invariants() {
    let report = budget_sweep(&small_config(), Execution::default()).unwrap();
    assert_eq!(report.rows.len(), 3 * 2 * 2);
    for r in &report.rows {
        assert!(0.0 <= r.avg_regret && r.avg_regret <= r.worst_regret);
        assert_eq!(r.pull_histogram.iter().sum::<usize>(), r.budget);
    }
    let hist = report.histogram_csv();
    assert!(hist.starts_with("policy,budget,replication,arm,pulls\n"));
    assert_eq!(hist.lines().count(), 1 + 12 * 4);
}

#[test]
fn reports_are_byte_identical_and_parallel_agrees() {
    let cfg = small_config();
    let a = budget_sweep(&cfg, Execution::Sequential).unwrap();
    let b = budget_sweep(&cfg, Execution::Sequential).unwrap();
    let c = budget_sweep(&cfg, Execution::with_jobs(Some(3))).unwrap();
    assert_eq!(a.regret_csv(), b.regret_csv());
    assert_eq!(a.regret_csv(), c.regret_csv());
    assert_eq!(a.histogram_csv(), c.histogram_csv());

    let dir = tempfile::tempdir().unwrap();
    let one = a.write(&dir.path().join("run1")).unwrap();
    let two = b.write(&dir.path().join("run2")).unwrap();
    for (p, q) in one.iter().zip(&two) {
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(q).unwrap());
    }
}

#[test]
fn replay_is_bit_exact() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("sweep");
    let report = budget_sweep(&cfg, Execution::default()).unwrap();
    report.write(&prefix).unwrap();
    let logged = read_regret_csv(&dir.path().join("sweep.csv")).unwrap();
    assert_eq!(logged.len(), report.rows.len());
    for row in &logged {
        let again = replay_cell(&cfg, &row.policy, row.budget, row.replication).unwrap();
        assert_eq!(again.avg_regret.to_bits(), row.avg_regret.to_bits());
        assert_eq!(again.worst_regret.to_bits(), row.worst_regret.to_bits());
    }
    assert!(replay_cell(&cfg, "contextual_gap", 21, 0).is_err());
    assert!(replay_cell(&cfg, "nobody", 20, 0).is_err());
    assert!(replay_cell(&cfg, "contextual_gap", 20, 2).is_err());
}

#[test]
fn failed_cells_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    let mut text = String::from("d=1,A=2,means=1\n");
    for i in 0..30 {
        text.push_str(&format!("{},0.5,0,0.5,0\n", i as f64 * 0.1));
    }
    std::fs::write(&path, text).unwrap();
    let mut env = EnvSpec::csv(&path);
    env.arms = 2;
    let cfg = ExperimentConfig {
        env,
        policies: vec![settings(PolicyKind::Uniform, 1.0, 1.0)],
        budgets: vec![10, 25],
        eval_size: 10,
        replications: 1,
        seed: 0,
        output: None,
        timing: false,
        tuning: None,
    };
    let report = budget_sweep(&cfg, Execution::Sequential).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].budget, 25);
    let written = report.write(&dir.path().join("out")).unwrap();
    assert!(written.iter().any(|p| p.ends_with("out_failures.csv")));
}

fn grid(bandwidth: Vec<f64>, env: Option<EnvSpec>) -> TuningGrid {
    TuningGrid {
        bandwidth,
        lambda: vec![0.01],
        alpha: vec![],
        epsilon_decay: vec![],
        ts_scale: vec![],
        budget: 20,
        eval_size: 50,
        replications: 2,
        env,
    }
}

#[test]
fn singleton_grid_returns_its_point() {
    let base = settings(PolicyKind::KernelTs, 0.7, 0.3);
    let mut g = grid(vec![0.25], None);
    g.lambda = vec![0.5];
    let tuned = grid_search(&constant_env([0.0, 0.5]), &[base], &g, 1, Execution::Sequential).unwrap();
    assert_eq!(tuned[0].grid_size, 1);
    assert_eq!(tuned[0].settings.kernel.bandwidth, 0.25);
    assert_eq!(tuned[0].settings.lambda, 0.5);
}

#[test]
fn planted_zero_regret_point_wins() {
    // With a tiny bandwidth the estimators forget everything between
    // contexts and recommend arm 0; a wide kernel learns the constant gap.
    let env = constant_env([0.0, 0.5]);
    let base = settings(PolicyKind::KernelUcbMod, 1.0, 0.01);
    let tuned = grid_search(&env, &[base], &grid(vec![1e-4, 1.0, 2.0], None), 1, Execution::Sequential).unwrap();
    assert_eq!(tuned[0].settings.kernel.bandwidth, 1.0);
    assert_eq!(tuned[0].score, 0.0);
}

#[test]
fn tuned_settings_are_used_unchanged() {
    let mut cfg = small_config();
    cfg.tuning = Some(grid(vec![0.2, 0.5], None));
    let (tuned_cfg, tuned) = tune_experiment(&cfg, Execution::Sequential).unwrap();
    for t in &tuned {
        let i = tuned_cfg.policy_index(&t.settings.label()).unwrap();
        assert_eq!(tuned_cfg.policies[i], t.settings);
    }
    assert_eq!(tuned_cfg.budgets, cfg.budgets);
    assert_eq!(tuned_cfg.seed, cfg.seed);
    assert!(tune_experiment(&small_config(), Execution::Sequential).is_err());
}

#[test]
fn config_survives_a_toml_round_trip() {
    let mut cfg = small_config();
    cfg.tuning = Some(grid(vec![0.2], Some(constant_env([0.0, 1.0]))));
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
}
