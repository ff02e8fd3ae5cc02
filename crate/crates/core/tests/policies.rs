use ctxgap::policies::{arm_bundles, contextual_gap_choice, epsilon_greedy_choice, recommend, select_contextual_gap};
use ctxgap::{
    gap_indices, ArmState, Bandit, BanditState, ConfidenceBundle, ConfidenceParams, EnvSpec, Environment, KernelSpec,
    PolicyConfig, PolicyKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> ConfidenceParams {
    ConfidenceParams::new(1.0, 1.0).unwrap()
}

fn bundles(upper: &[f64], lower: &[f64]) -> Vec<ConfidenceBundle> {
    upper
        .iter()
        .zip(lower)
        .map(|(&u, &l)| ConfidenceBundle::from_bounds(l, u, &params()))
        .collect()
}

/// Straight from the definitions, no shortcuts.
fn reference(b: &[ConfidenceBundle]) -> (Vec<f64>, usize, usize, usize) {
    let n = b.len();
    let gaps: Vec<f64> = (0..n)
        .map(|a| {
            let m = (0..n).filter(|&i| i != a).map(|i| b[i].upper).fold(f64::NEG_INFINITY, f64::max);
            m - b[a].lower
        })
        .collect();
    let mut best = 0;
    for a in 0..n {
        if gaps[a] < gaps[best] {
            best = a;
        }
    }
    let mut rival = usize::MAX;
    for a in 0..n {
        if a != best && (rival == usize::MAX || b[a].upper > b[rival].upper) {
            rival = a;
        }
    }
    let (lo, hi) = (best.min(rival), best.max(rival));
    let chosen = if b[hi].width > b[lo].width { hi } else { lo };
    (gaps, best, rival, chosen)
}

fn random_bundles(rng: &mut ChaCha8Rng, n: usize) -> Vec<ConfidenceBundle> {
    // Small integer grid so that ties in B, U and widths occur often.
    let coarse = rng.random_bool(0.5);
    (0..n)
        .map(|_| {
            let (l, w) = if coarse {
                (rng.random_range(-3..3) as f64, rng.random_range(0..4) as f64)
            } else {
                (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0))
            };
            ConfidenceBundle::from_bounds(l, l + w, &params())
        })
        .collect()
}

#[test]
fn selection_matches_exhaustive_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let n = rng.random_range(2..=6);
        let b = random_bundles(&mut rng, n);
        let d = contextual_gap_choice(&b).unwrap();
        let (gaps, best, rival, chosen) = reference(&b);
        assert_eq!(d.gaps, gaps);
        assert_eq!((d.best, d.rival, d.chosen), (best, rival, Some(chosen)));
        let other = if chosen == best { rival } else { best };
        assert!(b[chosen].width >= b[other].width);
    }
}

#[test]
fn worked_cases() {
    let d = contextual_gap_choice(&bundles(&[8.0, 7.0, 6.0], &[2.0, 5.0, 1.0])).unwrap();
    assert_eq!(d.widths, vec![6.0, 2.0, 5.0]);
    assert_eq!((d.best, d.rival, d.chosen), (1, 0, Some(0)));

    let d = contextual_gap_choice(&bundles(&[8.0, 7.0, 6.0], &[4.0, 1.0, 4.0])).unwrap();
    assert_eq!(d.widths, vec![4.0, 6.0, 2.0]);
    assert_eq!((d.best, d.rival, d.chosen), (0, 1, Some(1)));
}

#[test]
fn ucb_rule_on_worked_cases() {
    // Kernel-UCB explores argmax U, which is the first arm in both cases.
    for lower in [[2.0, 5.0, 1.0], [4.0, 1.0, 4.0]] {
        let b = bundles(&[8.0, 7.0, 6.0], &lower);
        let pick = (0..3).fold(0, |m, a| if b[a].upper > b[m].upper { a } else { m });
        assert_eq!(pick, 0);
    }
}

#[test]
fn shift_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let n = rng.random_range(2..=6);
        let b = random_bundles(&mut rng, n);
        let c = rng.random_range(-5..5) as f64;
        let shifted: Vec<_> = b
            .iter()
            .map(|x| ConfidenceBundle::from_bounds(x.lower + c, x.upper + c, &params()))
            .collect();
        let d0 = gap_indices(&b).unwrap();
        let d1 = gap_indices(&shifted).unwrap();
        assert_eq!((d0.best, d0.rival), (d1.best, d1.rival));
        for (g0, g1) in d0.gaps.iter().zip(&d1.gaps) {
            assert!((g0 - g1).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn permutation_equivariance(
        raw in prop::collection::vec((-1.0f64..1.0, 0.0f64..2.0), 2..7),
        seed in any::<u64>(),
    ) {
        let b: Vec<_> = raw.iter().map(|&(l, w)| ConfidenceBundle::from_bounds(l, l + w, &params())).collect();
        let mut perm: Vec<usize> = (0..b.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<_> = perm.iter().map(|&i| b[i]).collect();
        let d0 = gap_indices(&b).unwrap();
        let d1 = gap_indices(&permuted).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(d1.gaps[k], d0.gaps[i]);
        }
        // Continuous draws make ties improbable; when they happen the
        // gap values must still agree.
        prop_assert_eq!(d0.gaps[perm[d1.best]], d0.best_gap());
        prop_assert_eq!(b[perm[d1.rival]].upper, permuted[d1.rival].upper);
    }

    #[test]
    fn gap_dominated_by_chosen_width(raw in prop::collection::vec((-1.0f64..1.0, 0.0f64..2.0), 2..7)) {
        let b: Vec<_> = raw.iter().map(|&(l, w)| ConfidenceBundle::from_bounds(l, l + w, &params())).collect();
        let d = contextual_gap_choice(&b).unwrap();
        let chosen = d.chosen.unwrap();
        prop_assert!(chosen == d.best || chosen == d.rival);
        // B_J ≤ s_chosen whenever B_J is positive (intervals overlap).
        if d.best_gap() > 0.0 {
            prop_assert!(d.best_gap() <= b[chosen].width + 1e-12);
        }
    }

    #[test]
    fn gap_bounds_regret_when_covered(
        means in prop::collection::vec(-1.0f64..1.0, 2..7),
        slack in prop::collection::vec((0.0f64..0.5, 0.0f64..0.5), 6),
    ) {
        let b: Vec<_> = means
            .iter()
            .zip(&slack)
            .map(|(&m, &(lo, hi))| ConfidenceBundle::from_bounds(m - lo, m + hi, &params()))
            .collect();
        let d = gap_indices(&b).unwrap();
        let best = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (a, &m) in means.iter().enumerate().filter(|&(_, &m)| m < best) {
            prop_assert!(d.gaps[a] >= best - m - 1e-12);
        }
    }
}

fn config(arms: usize) -> PolicyConfig {
    let mut c = PolicyConfig::new(arms, KernelSpec::gaussian(0.5).unwrap(), params());
    c.seed = 99;
    c
}

fn sine(arms: usize) -> Environment {
    let mut spec = EnvSpec::synthetic_sine();
    spec.arms = arms;
    Environment::new(&spec, 3).unwrap()
}

fn trace(kind: PolicyKind, cfg: PolicyConfig, steps: usize) -> (Vec<usize>, Bandit) {
    let mut env = sine(cfg.arms);
    let mut b = Bandit::new(kind, cfg).unwrap();
    let mut arms = Vec::new();
    for _ in 0..steps {
        let s = env.next_step().unwrap();
        let a = b.select(s.context.as_slice()).unwrap();
        b.observe(s.context.as_slice(), a, s.realized_rewards[a]).unwrap();
        arms.push(a);
    }
    (arms, b)
}

#[test]
fn burn_in_is_round_robin_for_every_policy() {
    for kind in PolicyKind::ALL {
        let mut cfg = config(3);
        cfg.burn_in = 2;
        let (arms, b) = trace(kind, cfg, 6);
        assert_eq!(arms, vec![0, 1, 2, 0, 1, 2], "{kind}");
        assert_eq!(b.state().pull_counts(), &[2, 2, 2]);
    }
}

#[test]
fn contextual_gap_picks_from_candidates() {
    let cfg = config(4);
    let mut env = sine(4);
    let mut state = BanditState::new(&cfg).unwrap();
    for t in 0..300 {
        let s = env.next_step().unwrap();
        let x = s.context.as_slice();
        let (a, d) = select_contextual_gap(&state, x, &cfg).unwrap();
        if t < cfg.burn_in_steps() {
            assert!(d.is_none());
        } else {
            let d = d.unwrap();
            assert!(a == d.best || a == d.rival);
            let other = if a == d.best { d.rival } else { d.best };
            assert!(d.widths[a] >= d.widths[other]);
        }
        state.observe(&cfg, x, a, s.realized_rewards[a]).unwrap();
    }
    assert_eq!(state.pull_counts().iter().sum::<usize>(), 300);
    assert_eq!(state.steps(), 300);
    assert!(state.pull_counts().iter().all(|&n| n >= cfg.burn_in));
}

#[test]
fn traces_are_deterministic() {
    for kind in PolicyKind::ALL {
        let (a, _) = trace(kind, config(5), 200);
        let (b, _) = trace(kind, config(5), 200);
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn ucb_and_ucb_mod_explore_identically() {
    let (a, x) = trace(PolicyKind::KernelUcb, config(5), 300);
    let (b, y) = trace(PolicyKind::KernelUcbMod, config(5), 300);
    assert_eq!(a, b);
    assert_eq!(x.state().fingerprint(), y.state().fingerprint());
}

#[test]
fn exploitation_rules() {
    let (_, ucb) = trace(PolicyKind::KernelUcb, config(5), 200);
    let (_, cg) = trace(PolicyKind::ContextualGap, config(5), 200);
    let (_, ts) = trace(PolicyKind::KernelTs, config(5), 200);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x = [rng.random_range(0.0..std::f64::consts::TAU)];
        let b = arm_bundles(ucb.state(), &x, ucb.config()).unwrap();
        let top_u = (0..5).fold(0, |m, a| if b[a].upper > b[m].upper { a } else { m });
        assert_eq!(ucb.recommend(&x).unwrap(), top_u);

        let b = arm_bundles(cg.state(), &x, cg.config()).unwrap();
        assert_eq!(cg.recommend(&x).unwrap(), gap_indices(&b).unwrap().best);

        let b = arm_bundles(ts.state(), &x, ts.config()).unwrap();
        let top_m = (0..5).fold(0, |m, a| if b[a].mean > b[m].mean { a } else { m });
        assert_eq!(ts.recommend(&x).unwrap(), top_m);
    }
}

#[test]
fn greedy_when_epsilon_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let means = [0.1, 0.7, 0.3];
    for _ in 0..1000 {
        assert_eq!(epsilon_greedy_choice(&means, 0.0, &mut rng), 1);
    }
    let picks: Vec<usize> = (0..1000).map(|_| epsilon_greedy_choice(&means, 1.0, &mut rng)).collect();
    assert!(!picks.contains(&1));
    assert!(picks.contains(&0) && picks.contains(&2));
}

#[test]
fn thompson_without_spread_is_greedy() {
    let mut cfg = config(4);
    cfg.ts_scale = f64::MIN_POSITIVE;
    let mut env = sine(4);
    let mut b = Bandit::new(PolicyKind::KernelTs, cfg).unwrap();
    for t in 0..300 {
        let s = env.next_step().unwrap();
        let x = s.context.as_slice();
        let bundles = arm_bundles(b.state(), x, b.config()).unwrap();
        let a = b.select(x).unwrap();
        if t >= 4 {
            let greedy = (0..4).fold(0, |m, i| if bundles[i].mean > bundles[m].mean { i } else { m });
            assert_eq!(a, greedy, "{t} {:?}", bundles.iter().map(|b| b.mean).collect::<Vec<_>>());
        }
        b.observe(x, a, s.realized_rewards[a]).unwrap();
    }
}

#[test]
fn unknown_kind_is_rejected() {
    assert!("kernel_ucb_mod".parse::<PolicyKind>().is_ok());
    assert!("softmax".parse::<PolicyKind>().is_err());
}

fn arm(kernel: KernelSpec, samples: &[(f64, f64)]) -> ArmState {
    let mut s = ArmState::new(kernel, 1.0).unwrap();
    for &(x, r) in samples {
        s.update(&[x], r).unwrap();
    }
    s
}

#[test]
fn windowed_recommendation_takes_smallest_gap() {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let empty = || vec![arm(k, &[]), arm(k, &[]), arm(k, &[])];
    let many = |r: f64| vec![(0.0, r); 40];
    // The middle snapshot is confident that arm 2 dominates.
    let confident = vec![arm(k, &many(-1.0)), arm(k, &many(-1.0)), arm(k, &many(1.0))];
    let mut cfg = PolicyConfig::new(3, k, params());
    cfg.history_window = 3;
    let state = BanditState::with_history(empty(), vec![empty(), confident.clone()]);
    let x = [0.0];

    let mut best = (f64::INFINITY, 0);
    for arms in [empty(), confident.clone(), empty()] {
        let probe = BanditState::with_history(arms, vec![]);
        let d = gap_indices(&arm_bundles(&probe, &x, &cfg).unwrap()).unwrap();
        if d.best_gap() < best.0 {
            best = (d.best_gap(), d.best);
        }
    }
    assert_eq!(best.1, 2);
    assert_eq!(recommend(&state, &x, &cfg).unwrap(), 2);

    cfg.history_window = 1;
    assert_eq!(recommend(&state, &x, &cfg).unwrap(), 0);
}

#[test]
fn identical_window_equals_single() {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let arms = || vec![arm(k, &[(0.1, 0.4), (1.0, -0.2)]), arm(k, &[(0.5, 0.3)])];
    let mut cfg = PolicyConfig::new(2, k, params());
    cfg.history_window = 3;
    let windowed = BanditState::with_history(arms(), vec![arms(), arms()]);
    let single = BanditState::with_history(arms(), vec![]);
    let mut one = cfg.clone();
    one.history_window = 1;
    for i in 0..50 {
        let x = [i as f64 * 0.1 - 2.0];
        assert_eq!(recommend(&windowed, &x, &cfg).unwrap(), recommend(&single, &x, &one).unwrap());
    }
}

#[test]
fn snapshots_are_capped_by_window() {
    let mut cfg = config(3);
    cfg.history_window = 4;
    let (_, b) = trace(PolicyKind::ContextualGap, cfg, 50);
    assert_eq!(b.state().snapshot_count(), 3);
    let (_, b) = trace(PolicyKind::ContextualGap, config(3), 50);
    assert_eq!(b.state().snapshot_count(), 0);
}
