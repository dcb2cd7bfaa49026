use hoqo::protocols::{
    self, det_value, golden, mixed_state_protocol, prob_value, reduced_norm, sar_convert,
    visibility_threshold, Direction, MixedOutcome,
};
use hoqo::task::{InputState, Mode, ProtocolSpec, Strategy, Target};
use hoqo::tensor::{haar_unitary, CMatrix, CVector, C64};
use hoqo::twirl::performance_operator;
use hoqo::validity::{
    check_class, check_protocol_covariance, check_superinstrument, fidelity_statistics,
    verify_defining_equation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_psi(d: usize, rng: &mut ChaCha8Rng) -> CVector {
    haar_unitary(d, rng).unwrap().column(0).into_owned()
}

/// (V⊗W)Σ√λ_i|ii⟩ with random spectrum and local bases.
fn random_schmidt(d: usize, rng: &mut ChaCha8Rng) -> CVector {
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    let t: f64 = w.iter().sum();
    let v = haar_unitary(d, rng).unwrap();
    let u = haar_unitary(d, rng).unwrap();
    let mut psi = CVector::zeros(d * d);
    for (i, wi) in w.iter().enumerate() {
        psi[i * d + i] = C64::new((wi / t).sqrt(), 0.0);
    }
    v.kronecker(&u) * psi
}

fn pure(f: Target, mode: Mode, d: usize, psi: &CVector) -> ProtocolSpec {
    ProtocolSpec::new(f, mode, d, 1, Strategy::Parallel, InputState::Pure { psi: psi.clone() }).unwrap()
}

#[test]
fn probabilistic_goldens_satisfy_defining_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 2..=4 {
        for f in [Target::Trans, Target::Conj, Target::Inv, Target::Sar] {
            let psi = random_psi(d, &mut rng);
            let r = golden(&pure(f, Mode::Prob, d, &psi)).unwrap();
            assert!((r.value - prob_value(f, d)).abs() < 1e-12);
            let rep = verify_defining_equation(&r.supermap, &r.spec, Some(r.value), 30, &mut rng).unwrap();
            assert!(rep.overall, "f={f} d={d}\n{}", rep.render());
            let total = r.total.as_ref().unwrap();
            let si = check_superinstrument(&r.supermap, total, Strategy::Parallel, d, 1).unwrap();
            assert!(si.overall, "f={f} d={d}\n{}", si.render());
            let cov = check_protocol_covariance(&r.supermap, &r.spec, 20, &mut rng).unwrap();
            assert!(cov.overall, "f={f} d={d}\n{}", cov.render());
        }
    }
}

#[test]
fn deterministic_goldens_reach_closed_form_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for d in 2..=4 {
        for f in [Target::Trans, Target::Conj, Target::Inv, Target::Sar] {
            let psi = random_psi(d, &mut rng);
            let spec = pure(f, Mode::Det, d, &psi);
            let r = golden(&spec).unwrap();
            let omega = performance_operator(&spec).unwrap();
            let exact = r.supermap.hs_inner(&omega).unwrap().re;
            assert!((exact - det_value(f, d)).abs() < 1e-10, "f={f} d={d}: {exact}");
            let class = check_class(&r.supermap, Strategy::Parallel, d, 1).unwrap();
            assert!(class.overall, "f={f} d={d}\n{}", class.render());
            let (mean, spread) = fidelity_statistics(&r.supermap, &spec, 30, &mut rng).unwrap();
            assert!(spread < 1e-9, "f={f} d={d} spread {spread}");
            assert!((mean - exact).abs() < 1e-9);
            let cov = check_protocol_covariance(&r.supermap, &r.spec, 20, &mut rng).unwrap();
            assert!(cov.overall, "f={f} d={d}\n{}", cov.render());
        }
    }
}

#[test]
fn det_transposition_branch_decomposition() {
    let d = 3;
    let psi = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
    let spec = pure(Target::Trans, Mode::Det, d, &psi);
    let omega = performance_operator(&spec).unwrap();
    let prob = protocols::optimal_prob_transposition(d, &psi).unwrap();
    let det = protocols::optimal_det_transposition(d, &psi).unwrap();
    let fail = det.supermap.sub(&prob.supermap).unwrap();
    let p = prob.supermap.hs_inner(&omega).unwrap().re;
    let rest = fail.hs_inner(&omega).unwrap().re;
    // success branch is exact, so it contributes p·1
    assert!((p - 1.0 / 3.0).abs() < 1e-12);
    let f_fail = rest / (1.0 - p);
    assert!((p + (1.0 - p) * f_fail - det.value).abs() < 1e-12);
    assert!((f_fail - 1.0 / (d as f64 + 1.0) / (1.0 - p)).abs() < 1e-12);
}

#[test]
fn bipartite_goldens() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for d in [2, 3] {
        for _ in 0..4 {
            let psi = random_schmidt(d, &mut rng);
            let p_expect = 1.0 / (d as f64 * reduced_norm(&psi, d, d));
            for f in [Target::Trans, Target::Inv, Target::Conj, Target::Sar] {
                let st = InputState::Bipartite { psi: psi.clone(), dim_a: d };
                let spec = ProtocolSpec::new(f, Mode::Prob, d, 1, Strategy::Parallel, st).unwrap();
                let r = golden(&spec).unwrap();
                let want = match (f, d) {
                    (Target::Trans | Target::Sar, _) => p_expect,
                    (Target::Inv, 2) => 1.0 / (2.0 * reduced_norm(&psi, d, d)),
                    (Target::Conj, 2) => 1.0,
                    _ => 0.0,
                };
                assert!((r.value - want).abs() < 1e-12, "f={f} d={d}");
                let rep = verify_defining_equation(&r.supermap, &r.spec, Some(r.value), 20, &mut rng).unwrap();
                assert!(rep.overall, "f={f} d={d}\n{}", rep.render());
                let si = check_superinstrument(&r.supermap, r.total.as_ref().unwrap(), Strategy::Parallel, d, 1).unwrap();
                assert!(si.overall, "f={f} d={d}\n{}", si.render());
                let omega = performance_operator(&spec).unwrap();
                let tr = r.supermap.hs_inner(&omega).unwrap().re;
                assert!((tr - want).abs() < 1e-10, "f={f} d={d}: Tr(SΩ) = {tr}");
            }
        }
    }
}

#[test]
fn mixed_state_threshold_behaviour() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for d in 2..=4 {
        for f in [Target::Trans, Target::Conj, Target::Inv] {
            let psi = random_psi(d, &mut rng);
            let eta_star = visibility_threshold(f, d);
            let MixedOutcome::Exact(r) = mixed_state_protocol(f, d, &psi, eta_star).unwrap() else {
                panic!("threshold must be feasible");
            };
            let rep = verify_defining_equation(&r.supermap, &r.spec, Some(1.0), 20, &mut rng).unwrap();
            assert!(rep.get("defining-eq-haar").unwrap().pass, "f={f} d={d}\n{}", rep.render());
            if eta_star + 0.05 > 1.0 {
                continue;
            }
            let MixedOutcome::Infeasible { best, gap, .. } =
                mixed_state_protocol(f, d, &psi, eta_star + 0.05).unwrap()
            else {
                panic!("above threshold must be infeasible");
            };
            assert!((gap - 0.05).abs() < 1e-12);
            let target_spec = r.spec.with_state(InputState::Mixed { psi: psi.clone(), eta: eta_star + 0.05 }).unwrap();
            let u = haar_unitary(d, &mut rng).unwrap();
            let dist = best.apply(&u).unwrap().trace_distance(&target_spec.target_output(&u).unwrap()).unwrap();
            let expect = 0.05 * (d as f64 - 1.0) / d as f64;
            assert!((dist - expect).abs() < 1e-9, "f={f} d={d}: {dist}");
        }
    }
}

#[test]
fn sar_conversion_preserves_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for d in [2, 3] {
        let psi = random_psi(d, &mut rng);
        for mode in [Mode::Prob, Mode::Det] {
            let t = golden(&pure(Target::Trans, mode, d, &psi)).unwrap();
            let s = sar_convert(&t, Direction::ToSar).unwrap();
            assert_eq!(s.spec.f, Target::Sar);
            let omega = performance_operator(&s.spec).unwrap();
            let v = s.supermap.hs_inner(&omega).unwrap().re;
            assert!((v - t.value).abs() < 1e-10);
        }
    }
}

#[test]
fn rus_construction_is_valid_and_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for (d, k) in [(2, 2), (2, 3), (3, 2)] {
        let psi = random_psi(d, &mut rng);
        let spec = ProtocolSpec::new(Target::Trans, Mode::Prob, d, k, Strategy::Parallel, InputState::Pure { psi }).unwrap();
        let r = golden(&spec).unwrap();
        assert!((r.value - (1.0 - (1.0 - 1.0 / d as f64).powi(k as i32))).abs() < 1e-12);
        let rep = verify_defining_equation(&r.supermap, &r.spec, Some(r.value), 10, &mut rng).unwrap();
        assert!(rep.overall, "d={d} k={k}\n{}", rep.render());
        let si = check_superinstrument(&r.supermap, r.total.as_ref().unwrap(), Strategy::Parallel, d, k).unwrap();
        assert!(si.overall, "d={d} k={k}\n{}", si.render());
    }
}

#[test]
fn spec_examples_at_identity() {
    let e0 = |d: usize| {
        let mut v = CVector::zeros(d);
        v[0] = C64::new(1.0, 0.0);
        v
    };
    // inversion d=2, U=1 → ½|ψ⟩⟨ψ|
    let r = protocols::optimal_prob_inversion(2, &e0(2)).unwrap();
    let out = r.apply(&CMatrix::identity(2, 2)).unwrap();
    assert!((out.entries()[(0, 0)].re - 0.5).abs() < 1e-12);
    assert!(out.entries()[(1, 1)].norm() < 1e-12);
    // conjugation d=3 has nothing to offer
    let r = protocols::optimal_prob_conjugation(3, &e0(3)).unwrap();
    assert_eq!(r.value, 0.0);
    assert!(r.supermap.frobenius_norm() == 0.0);
}

#[test]
fn sparse_bipartite_success_branch_has_finite_spectrum() {
    // this exact operator once drove the Hermitian eigensolver into NaN
    let st = InputState::schmidt(3, &[0.6, 0.3, 0.1]).unwrap();
    let spec = ProtocolSpec::new(Target::Trans, Mode::Prob, 3, 1, Strategy::Parallel, st).unwrap();
    let r = golden(&spec).unwrap();
    let ev = r.supermap.eigenvalues();
    assert!(ev.iter().all(|v| v.is_finite()));
    assert!(ev[0] > -1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rep = hoqo::validity::verify_protocol(&r, 10, &mut rng).unwrap();
    assert!(rep.overall, "{}", rep.render());
}
