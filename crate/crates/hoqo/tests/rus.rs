use hoqo::rus::{depolarizing, rounds_saved, simulate, ChannelModel, RusConfig, STATE_CHECK_EVERY};
use hoqo::task::{InputState, Target};

fn within(stats: &hoqo::rus::RusStats, want: f64, se: f64) {
    assert!((stats.p_hat - want).abs() <= 3.0 * se, "d={} k={}: {} vs {want} (SE {se})", stats.d, stats.k, stats.p_hat);
}

#[test]
fn success_rate_matches_closed_form() {
    for d in [2, 3] {
        for k in 1..=3 {
            let s = simulate(&RusConfig::pure(d, k, 20_000, 31)).unwrap();
            let want = 1.0 - (1.0 - 1.0 / d as f64).powi(k as i32);
            assert!((s.closed_form - want).abs() < 1e-15);
            within(&s, want, s.std_error);
            assert!((s.std_error - (s.p_hat * (1.0 - s.p_hat) / 20_000.0).sqrt()).abs() < 1e-15);
            // per-attempt Born frequency
            let q = 1.0 / d as f64;
            assert!((s.attempt_frequency - q).abs() <= 3.0 * s.attempt_std_error);
            assert_eq!(s.per_round.iter().sum::<u64>(), s.successes);
            assert!(s.state_checks > 0 && s.max_state_error < 1e-9, "d={d} k={k}");
        }
    }
}

#[test]
fn more_slots_never_hurt_with_paired_seeds() {
    let p: Vec<u64> = (1..=4).map(|k| simulate(&RusConfig::pure(3, k, 5_000, 7)).unwrap().successes).collect();
    assert!(p.windows(2).all(|w| w[0] <= w[1]), "{p:?}");
}

#[test]
fn bipartite_input() {
    let mut cfg = RusConfig::pure(2, 2, 20_000, 32);
    cfg.input = InputState::schmidt(2, &[0.9, 0.1]).unwrap();
    let s = simulate(&cfg).unwrap();
    let q = 1.0 / (2.0 * 0.9);
    within(&s, 1.0 - (1.0 - q) * (1.0 - q), s.std_error);
    assert!((s.attempt_frequency - q).abs() <= 3.0 * s.attempt_std_error);
    assert!(s.max_state_error < 1e-9);
}

#[test]
fn depolarizing_channel_keeps_attempt_rate() {
    for lambda in [0.0, 0.5, 0.9] {
        let mut cfg = RusConfig::pure(3, 1, 20_000, 33);
        cfg.channel = ChannelModel::Fixed(depolarizing(3, lambda).unwrap());
        let s = simulate(&cfg).unwrap();
        within(&s, 1.0 / 3.0, s.std_error);
    }
}

#[test]
fn storage_and_retrieval_target() {
    let mut cfg = RusConfig::pure(2, 2, 10_000, 34);
    cfg.target = Target::Sar;
    let s = simulate(&cfg).unwrap();
    within(&s, 0.75, s.std_error);
    assert!(s.state_checks > 0 && s.max_state_error < 1e-9);
}

#[test]
fn rounds_saved_follows_truncated_geometric_mean() {
    assert_eq!(rounds_saved(&simulate(&RusConfig::pure(2, 1, 1_000, 1)).unwrap()), 0.0);
    for (d, k) in [(2usize, 10usize), (3, 3)] {
        let s = simulate(&RusConfig::pure(d, k, 50_000, 35)).unwrap();
        let q = 1.0 / d as f64;
        let norm = 1.0 - (1.0 - q).powi(k as i32);
        let mean: f64 = (1..=k).map(|r| r as f64 * q * (1.0 - q).powi(r as i32 - 1)).sum::<f64>() / norm;
        let saved = rounds_saved(&s);
        assert!((saved - (k as f64 - mean)).abs() < 0.03, "d={d} k={k}: {saved} vs {}", k as f64 - mean);
        if k == 10 {
            assert!(saved >= 7.0);
        }
    }
}

#[test]
fn result_independent_of_thread_count() {
    let cfg = RusConfig::pure(3, 2, 3 * STATE_CHECK_EVERY, 36);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| simulate(&cfg).unwrap());
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| simulate(&cfg).unwrap());
    assert_eq!(one, many);
}

#[test]
fn rejects_bad_configs() {
    assert!(simulate(&RusConfig::pure(2, 0, 10, 0)).is_err());
    assert!(simulate(&RusConfig::pure(2, 1, 0, 0)).is_err());
    let mut cfg = RusConfig::pure(2, 1, 10, 0);
    cfg.target = Target::Inv;
    assert!(simulate(&cfg).is_err());
}
