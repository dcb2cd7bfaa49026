//! Every example runs and its output agrees with values computed here independently.

macro_rules! example {
    ($m:ident, $file:literal) => {
        mod $m {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(choi_calculus, "choi_calculus.rs");
example!(twirl, "twirl.rs");
example!(closed_forms, "closed_forms.rs");
example!(bipartite, "bipartite.rs");
example!(noisy_input, "noisy_input.rs");
example!(storage_retrieval, "storage_retrieval.rs");
example!(spanning, "spanning.rs");
example!(sdp_solve, "sdp_solve.rs");
example!(table, "table.rs");
example!(repeat_until_success, "repeat_until_success.rs");
example!(command_line, "command_line.rs");

use hoqo::task::{Mode, Strategy, Target};

#[test]
fn choi_calculus_composes() {
    let s = choi_calculus::run_example().unwrap();
    assert!(s.composition_error < 1e-12);
    assert!(s.identity_link_error < 1e-12);
    assert_eq!(s.swap_trace.round(), 3.0);
    // dim Sym²(C³)
    assert_eq!(s.sym_rank.round(), 6.0);
}

#[test]
fn twirl_is_a_projection() {
    let s = twirl::run_example().unwrap();
    assert_eq!(s.commutant_dim, 2);
    assert!(s.idempotence < 1e-12);
    assert!(s.trace_change < 1e-12);
    assert!(s.monte_carlo_gap < 1e-2);
    assert!((s.omega_trace - 2.0).abs() < 1e-12);
}

fn prob_oracle(f: Target, d: usize) -> f64 {
    let d = d as f64;
    match f {
        Target::Trans | Target::Sar => 1.0 / d,
        Target::Conj if d == 2.0 => 1.0,
        Target::Inv if d == 2.0 => 0.5,
        _ => 0.0,
    }
}

fn det_oracle(f: Target, d: usize) -> f64 {
    let d = d as f64;
    match f {
        Target::Trans | Target::Sar => (2.0 * d + 1.0) / (d * d + d),
        Target::Conj if d == 2.0 => 1.0,
        Target::Conj => 2.0 / (d + 1.0),
        Target::Inv => (d + 3.0) / (d * (d + 1.0)),
    }
}

#[test]
fn closed_forms_match_formulas() {
    let rows = closed_forms::run_example().unwrap();
    assert_eq!(rows.len(), 24);
    for r in rows {
        let want = match r.mode {
            Mode::Prob => prob_oracle(r.f, r.d),
            Mode::Det => det_oracle(r.f, r.d),
        };
        assert!((r.value - want).abs() < 1e-12, "{} {} d={}", r.f, r.mode, r.d);
        assert!(r.passed, "{} {} d={}", r.f, r.mode, r.d);
    }
}

#[test]
fn bipartite_depends_on_largest_schmidt_weight() {
    for r in bipartite::run_example().unwrap() {
        let d = r.weights.len().max(2) as f64;
        let total: f64 = r.weights.iter().sum();
        let top = r.weights.iter().copied().fold(0.0, f64::max) / total;
        let want = 1.0 / (d * top);
        assert!((r.value - want).abs() < 1e-12, "{:?}", r.weights);
        assert!((r.overlap - want).abs() < 1e-10, "{:?}", r.weights);
        assert!(r.passed, "{:?}", r.weights);
    }
}

#[test]
fn noisy_input_threshold() {
    let rows = noisy_input::run_example().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        let d = r.d as f64;
        let want = match r.f {
            Target::Trans => d / (d * d - 1.0),
            Target::Conj if r.d == 2 => 1.0,
            Target::Conj => 1.0 / (d + 1.0),
            Target::Inv => 2.0 / (d * d - 1.0),
            Target::Sar => unreachable!(),
        };
        assert!((r.eta_star - want).abs() < 1e-12);
        assert!(r.residual <= 1e-9);
        // output is η*-visible; the target is (η*+0.05)-visible
        assert!((r.distance_above - 0.05 * (d - 1.0) / d).abs() < 1e-9);
    }
}

#[test]
fn storage_retrieval_keeps_value() {
    for r in storage_retrieval::run_example().unwrap() {
        assert!((r.sar_value - r.trans_value).abs() < 1e-10);
        assert_eq!(r.round_trip, 0.0);
        assert!(r.passed, "{} d={}", r.mode, r.d);
    }
}

/// dim span{U^{⊗k} ⊗ Ū^{⊗k}}: Σ (2j+1)² over integer spins j ≤ k for qubits, 1 + (d²−1)² for k = 1.
fn span_oracle(d: usize, k: usize) -> usize {
    if k == 1 {
        1 + (d * d - 1).pow(2)
    } else {
        assert_eq!(d, 2);
        (0..=k).map(|j| (2 * j + 1).pow(2)).sum()
    }
}

#[test]
fn spanning_ranks_and_classes() {
    let s = spanning::run_example().unwrap();
    for r in &s.ranks {
        assert_eq!(r.rank, span_oracle(r.d, r.k), "d={} k={}", r.d, r.k);
    }
    for (drawn, class, ok) in s.memberships {
        assert_eq!(ok, class >= drawn, "{drawn} in {class}");
    }
}

#[test]
fn sdp_example_solves() {
    let s = sdp_solve::run_example().unwrap();
    assert!((s.solver_eigenvalue - s.max_eigenvalue).abs() < 1e-5);
    assert!((s.value - 0.75).abs() < 1e-5);
    assert!(s.iterations > 0);
    assert!(s.defining_residual < 1e-5);
    assert!(s.class_residual < 1e-5);
}

#[test]
fn table_example_matches_reference() {
    let rows = table::run_example().unwrap();
    assert_eq!(rows.len(), 12);
    for r in rows {
        assert!(r.converged, "{}", r.instance);
        assert_eq!(r.matches, Some(true), "{}: {}", r.instance, r.value);
    }
}

#[test]
fn repeat_until_success_within_three_standard_errors() {
    let stats = repeat_until_success::run_example().unwrap();
    for s in &stats[..7] {
        let se = s.std_error.max(1e-12);
        assert!((s.p_hat - s.closed_form).abs() <= 3.0 * se, "d={} k={}: {} vs {}", s.d, s.k, s.p_hat, s.closed_form);
    }
    let q: f64 = 1.0 / (2.0 * 0.9);
    assert!((stats[6].closed_form - (1.0 - (1.0 - q).powi(2))).abs() < 1e-12);
    let dep = &stats[7];
    assert!((dep.p_hat - 0.5).abs() <= 3.0 * dep.std_error);
}

#[test]
fn command_line_example() {
    let s = command_line::run_example().unwrap();
    assert_eq!((s.span_code, s.build_code, s.usage_code), (0, 0, 2));
    assert_eq!(s.span_rank as usize, span_oracle(2, 2));
    assert!((s.build_value - det_oracle(Target::Inv, 3)).abs() < 1e-12);
}

#[test]
fn strategy_order_is_inclusion() {
    assert!(Strategy::Parallel < Strategy::Sequential && Strategy::Sequential < Strategy::General);
}
