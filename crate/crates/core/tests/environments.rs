use ctxgap::environments::{load_csv, Dataset};
use ctxgap::{simple_regret, EnvKind, EnvSpec, Environment, Error};

fn sine_dataset(rows: usize, noise: f64) -> Dataset {
    let mut spec = EnvSpec::synthetic_sine();
    spec.arms = 4;
    spec.noise_sigma = noise;
    let rows = Environment::new(&spec, 17).unwrap().take_steps(rows).unwrap();
    Dataset { dims: 1, arms: 4, rows }
}

#[test]
fn dataset_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sine.csv");
    let data = sine_dataset(3, 0.3);
    data.write_csv(&path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back, data);
    for (a, b) in back.rows.iter().zip(&data.rows) {
        for (x, y) in a.realized_rewards.iter().zip(&b.realized_rewards) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn csv_replay_reproduces_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let data = sine_dataset(50, 0.0);
    data.write_csv(&path).unwrap();
    let mut env = Environment::new(&EnvSpec::csv(&path), 0).unwrap();
    assert_eq!(env.arms(), 4);
    assert_eq!(env.remaining(), Some(50));
    let replay = env.take_steps(50).unwrap();
    assert_eq!(replay, data.rows);
    assert!(matches!(env.next_step(), Err(Error::EndOfData(50))));
}

#[test]
fn csv_window_and_shuffle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let data = sine_dataset(200, 0.0);
    data.write_csv(&path).unwrap();
    let mut spec = EnvSpec::csv(&path);
    spec.skip = 20;
    spec.take = Some(150);
    let window = Environment::new(&spec, 0).unwrap().take_steps(150).unwrap();
    assert_eq!(window, data.rows[20..170].to_vec());

    spec.shuffle = true;
    let a = Environment::new(&spec, 1).unwrap().take_steps(150).unwrap();
    let b = Environment::new(&spec, 1).unwrap().take_steps(150).unwrap();
    let c = Environment::new(&spec, 2).unwrap().take_steps(150).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let key = |s: &ctxgap::EnvStep| s.context.as_slice()[0].to_bits();
    let mut sorted_a: Vec<u64> = a.iter().map(key).collect();
    let mut sorted_w: Vec<u64> = window.iter().map(key).collect();
    sorted_a.sort_unstable();
    sorted_w.sort_unstable();
    assert_eq!(sorted_a, sorted_w);
}

#[test]
fn csv_without_means_cannot_be_scored() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nomeans.csv");
    std::fs::write(&path, "d=1,A=2\n0.5, 0.1, 0.9, ,\n").unwrap();
    let mut env = Environment::new(&EnvSpec::csv(&path), 0).unwrap();
    let step = env.next_step().unwrap();
    assert_eq!(step.realized_rewards, vec![0.1, 0.9]);
    assert!(matches!(simple_regret(&step, 0), Err(Error::Unsupported(_))));
}

#[test]
fn malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad_num = dir.path().join("bad.csv");
    std::fs::write(&bad_num, "d=1,A=2,means=0\n0.1,0.2,0.3\n0.1,zz,0.3\n").unwrap();
    match load_csv(&bad_num) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let bad_len = dir.path().join("len.csv");
    std::fs::write(&bad_len, "d=1,A=2,means=1\n0.1,0.2,0.3,0.4,0.5\n0.1,0.2\n").unwrap();
    assert!(matches!(load_csv(&bad_len), Err(Error::Schema(_))));
    assert!(matches!(load_csv(&dir.path().join("missing.csv")), Err(Error::Io(_))));
}

#[test]
fn noise_has_the_configured_spread() {
    let data = sine_dataset(20_000, 0.5);
    let resid: Vec<f64> = data
        .rows
        .iter()
        .flat_map(|r| {
            let m = r.true_means.clone().unwrap();
            r.realized_rewards.iter().zip(m).map(|(y, m)| y - m).collect::<Vec<_>>()
        })
        .collect();
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 0.01);
    assert!((sd - 0.5).abs() < 0.01);
}

#[test]
fn offset_variant_keeps_a_fixed_ordering() {
    let mut spec = EnvSpec::synthetic_sine();
    spec.arms = 3;
    spec.offsets = Some(vec![0.0, 0.6, 1.2]);
    spec.amplitude = 0.25;
    let steps = Environment::new(&spec, 4).unwrap().take_steps(2000).unwrap();
    for s in &steps {
        let m = s.true_means.as_ref().unwrap();
        assert!(m[0] < m[1] && m[1] < m[2]);
        assert_eq!(s.best_arm().unwrap(), 2);
    }
}

#[test]
fn ar1_means_depend_on_context() {
    let mut spec = EnvSpec::new(EnvKind::Ar1Sensor, 3);
    spec.dims = 2;
    spec.noise_sigma = 0.1;
    let steps = Environment::new(&spec, 9).unwrap().take_steps(500).unwrap();
    let first: Vec<f64> = steps.iter().map(|s| s.true_means.as_ref().unwrap()[0]).collect();
    let spread = first.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - first.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread > 0.1);
    // Successive contexts are strongly correlated.
    let xs: Vec<f64> = steps.iter().map(|s| s.context.as_slice()[0]).collect();
    let lag: f64 = xs.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    assert!(lag > 0.7);
}

#[test]
fn spec_parses_from_toml() {
    let spec: EnvSpec = toml::from_str("kind = \"unit_circle\"\narms = 3\ndims = 2\n").unwrap();
    assert_eq!(spec.kind, EnvKind::UnitCircle);
    spec.validate().unwrap();
    assert!(toml::from_str::<EnvSpec>("kind = \"synthetic_sine\"\nbogus = 1\n").is_err());
}
