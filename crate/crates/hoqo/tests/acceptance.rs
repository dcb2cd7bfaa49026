// Acceptance criteria 1–6, one PASS/FAIL line each. Exits nonzero on any failure.

use std::time::Instant;

use hoqo::protocols::{golden, mixed_state_protocol, reduced_norm, visibility_threshold, MixedOutcome};
use hoqo::rus::{simulate, RusConfig};
use hoqo::sdp::{golden_manifest, reproduce_table, solve_instance, Quantity, TableInstance, TableOptions};
use hoqo::task::{InputState, Mode, ProtocolSpec, Strategy, Target};
use hoqo::tensor::{haar_unitary, wires, CMatrix, CVector, LabeledOperator, Wire, C64};
use hoqo::twirl::{performance_operator, twirl};
use hoqo::validity::{
    check_general_k2, check_parallel, check_sequential, fidelity_statistics, per_u_fidelities, random_parallel,
    random_sequential, verify_defining_equation, verify_protocol,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const EXACT: f64 = 1e-9;
const MONTE_CARLO: f64 = 1e-2;
const STRUCTURAL: f64 = 1e-10;

const PROB: [Target; 4] = [Target::Trans, Target::Conj, Target::Inv, Target::Sar];

fn p_formula(f: Target, d: usize) -> f64 {
    match f {
        Target::Trans | Target::Sar => 1.0 / d as f64,
        Target::Conj => (d == 2) as u8 as f64,
        Target::Inv => {
            if d == 2 {
                0.5
            } else {
                0.0
            }
        }
    }
}

fn f_formula(f: Target, d: usize) -> f64 {
    let x = d as f64;
    match f {
        Target::Trans | Target::Sar => (2.0 * x + 1.0) / (x * x + x),
        Target::Conj if d == 2 => 1.0,
        Target::Conj => 2.0 / (x + 1.0),
        Target::Inv => (x + 3.0) / (x * (x + 1.0)),
    }
}

fn eta_formula(f: Target, d: usize) -> f64 {
    let x = d as f64;
    match f {
        Target::Trans | Target::Sar => x / (x * x - 1.0),
        Target::Conj if d == 2 => 1.0,
        Target::Conj => 1.0 / (x + 1.0),
        Target::Inv => 2.0 / (x * x - 1.0),
    }
}

fn random_psi(d: usize, rng: &mut ChaCha8Rng) -> CVector {
    haar_unitary(d, rng).unwrap().column(0).into_owned()
}

fn pure(f: Target, mode: Mode, d: usize, psi: &CVector) -> ProtocolSpec {
    ProtocolSpec::new(f, mode, d, 1, Strategy::Parallel, InputState::Pure { psi: psi.clone() }).unwrap()
}

/// (V⊗W)Σ√λ_i|ii⟩ with a random spectrum and random local bases.
fn random_schmidt(d: usize, rng: &mut ChaCha8Rng) -> CVector {
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.02..1.0)).collect();
    let t: f64 = w.iter().sum();
    let v = haar_unitary(d, rng).unwrap();
    let u = haar_unitary(d, rng).unwrap();
    let mut psi = CVector::zeros(d * d);
    for (i, wi) in w.iter().enumerate() {
        psi[i * d + i] = C64::new((wi / t).sqrt(), 0.0);
    }
    v.kronecker(&u) * psi
}

/// Haar average of Tr(S * |U⟩⟩⟨⟨U|) (probabilistic) or of the per-U fidelity (deterministic).
fn monte_carlo(s: &LabeledOperator, spec: &ProtocolSpec, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let us: Vec<CMatrix> = (0..samples).map(|_| haar_unitary(spec.d, rng).unwrap()).collect();
    match spec.mode {
        Mode::Det => per_u_fidelities(s, spec, &us).unwrap().iter().sum::<f64>() / samples as f64,
        Mode::Prob => {
            us.iter().map(|u| hoqo::protocols::apply_supermap(s, u, spec.k).unwrap().trace().re).sum::<f64>()
                / samples as f64
        }
    }
}

struct Outcome {
    problems: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { problems: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.problems.push(what());
        }
    }
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_mc: f64 = 0.0;
    for d in 2..=5 {
        let psi = random_psi(d, &mut rng);
        for f in [Target::Trans, Target::Conj, Target::Inv] {
            for mode in [Mode::Prob, Mode::Det] {
                let spec = pure(f, mode, d, &psi);
                let r = golden(&spec).unwrap();
                let want = if mode == Mode::Prob { p_formula(f, d) } else { f_formula(f, d) };
                o.require((r.value - want).abs() <= EXACT, || format!("{f} {mode} d={d}: value {} vs {want}", r.value));
                let exact = r.supermap.hs_inner(&performance_operator(&spec).unwrap()).unwrap().re;
                o.require((exact - want).abs() <= EXACT, || format!("{f} {mode} d={d}: Tr(SΩ) {exact} vs {want}"));
                let mc = monte_carlo(&r.supermap, &spec, 10_000, &mut rng);
                worst_mc = worst_mc.max((mc - exact).abs());
                o.require((mc - exact).abs() <= MONTE_CARLO, || format!("{f} {mode} d={d}: Monte Carlo {mc} vs {exact}"));
            }
            let eta = visibility_threshold(f, d);
            o.require((eta - eta_formula(f, d)).abs() <= EXACT, || format!("η* {f} d={d}: {eta}"));
        }
    }
    for i in 0..20 {
        let d = 2 + i % 3;
        let psi = random_schmidt(d, &mut rng);
        let want = 1.0 / (d as f64 * reduced_norm(&psi, d, d));
        let spec = ProtocolSpec::new(
            Target::Trans,
            Mode::Prob,
            d,
            1,
            Strategy::Parallel,
            InputState::Bipartite { psi, dim_a: d },
        )
        .unwrap();
        let r = golden(&spec).unwrap();
        let exact = r.supermap.hs_inner(&performance_operator(&spec).unwrap()).unwrap().re;
        o.require((r.value - want).abs() <= EXACT && (exact - want).abs() <= EXACT, || {
            format!("bipartite #{i} d={d}: {} / {exact} vs {want}", r.value)
        });
        if i < 5 {
            let mc = monte_carlo(&r.supermap, &spec, 10_000, &mut rng);
            worst_mc = worst_mc.max((mc - exact).abs());
            o.require((mc - exact).abs() <= MONTE_CARLO, || format!("bipartite #{i}: Monte Carlo {mc} vs {exact}"));
        }
    }
    println!("    worst Monte Carlo deviation {worst_mc:.2e}");
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut worst_res, mut worst_spread): (f64, f64) = (0.0, 0.0);
    let mut specs = Vec::new();
    for d in 2..=5 {
        let psi = random_psi(d, &mut rng);
        for f in PROB {
            specs.push(pure(f, Mode::Prob, d, &psi));
            specs.push(pure(f, Mode::Det, d, &psi));
        }
    }
    for d in [2, 3] {
        let psi = random_schmidt(d, &mut rng);
        for f in PROB {
            specs.push(
                ProtocolSpec::new(f, Mode::Prob, d, 1, Strategy::Parallel, InputState::Bipartite { psi: psi.clone(), dim_a: d })
                    .unwrap(),
            );
        }
    }
    for (d, k) in [(2, 2), (2, 3), (3, 2)] {
        let psi = random_psi(d, &mut rng);
        specs.push(ProtocolSpec::new(Target::Trans, Mode::Prob, d, k, Strategy::Parallel, InputState::Pure { psi }).unwrap());
    }
    for spec in specs {
        let r = golden(&spec).unwrap();
        let label = format!("{} {} d={} k={} {:?}", spec.f, spec.mode, spec.d, spec.k, std::mem::discriminant(&spec.state));
        match spec.mode {
            Mode::Prob => {
                let rep = verify_defining_equation(&r.supermap, &r.spec, Some(r.value), 100, &mut rng).unwrap();
                let res = rep.get("defining-eq-haar").unwrap().residual;
                worst_res = worst_res.max(res);
                o.require(res <= EXACT, || format!("{label}: residual {res:.2e}"));
            }
            Mode::Det => {
                let (_, spread) = fidelity_statistics(&r.supermap, &r.spec, 100, &mut rng).unwrap();
                worst_spread = worst_spread.max(spread);
                o.require(spread <= EXACT, || format!("{label}: fidelity spread {spread:.2e}"));
            }
        }
    }
    println!("    worst residual {worst_res:.2e}, worst fidelity spread {worst_spread:.2e}");
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let opts = TableOptions::default();
    let entries: Vec<_> = golden_manifest().iter().filter(|e| e.source == "reference-table").collect();
    for e in entries {
        let inst = TableInstance::new(e.task, e.quantity, e.k, e.d, e.strategy);
        let t = Instant::now();
        match reproduce_table(&inst, &opts) {
            Ok(row) => {
                println!(
                    "    {:<22} {:.6}  ref {:.4}  diff {:+.2e}  tol {:.0e}  {} ({:.1}s)",
                    inst.label(),
                    row.value,
                    e.value,
                    row.value - e.value,
                    e.tolerance,
                    row.method,
                    t.elapsed().as_secs_f64()
                );
                o.require(row.converged, || format!("{inst}: not converged"));
                o.require((row.value - e.value).abs() <= e.tolerance, || format!("{inst}: {} vs {}", row.value, e.value));
            }
            Err(err) => o.problems.push(format!("{inst}: {err}")),
        }
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let opts = TableOptions::default();
    for f in [Target::Conj, Target::Inv] {
        let inst = TableInstance::new(f, Quantity::P, 1, 3, Strategy::Parallel);
        let (row, _) = solve_instance(&inst, &opts).unwrap();
        println!("    {inst}: {:.2e}", row.value);
        o.require(row.converged && row.value <= 1e-6, || format!("{inst}: {} (converged {})", row.value, row.converged));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut closest = f64::INFINITY;
    for f in [Target::Trans, Target::Conj, Target::Inv] {
        for d in 2..=5 {
            let eta = visibility_threshold(f, d) + 0.05;
            if eta > 1.0 {
                continue;
            }
            let psi = random_psi(d, &mut rng);
            let MixedOutcome::Infeasible { best, .. } = mixed_state_protocol(f, d, &psi, eta).unwrap() else {
                o.problems.push(format!("{f} d={d}: η*+0.05 reported feasible"));
                continue;
            };
            let spec = best.spec.with_state(InputState::Mixed { psi: psi.clone(), eta }).unwrap();
            for _ in 0..20 {
                let u = haar_unitary(d, &mut rng).unwrap();
                let dist = best.apply(&u).unwrap().trace_distance(&spec.target_output(&u).unwrap()).unwrap();
                closest = closest.min(dist);
                o.require(dist >= 1e-3, || format!("{f} d={d}: trace distance {dist:.2e}"));
            }
        }
    }
    println!("    smallest trace distance above threshold {closest:.4}");
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    for d in [2, 3] {
        for k in 1..=3 {
            let t = Instant::now();
            let s = simulate(&RusConfig::pure(d, k, 100_000, 105)).unwrap();
            let secs = t.elapsed().as_secs_f64();
            let want = 1.0 - (1.0 - 1.0 / d as f64).powi(k as i32);
            let q = 1.0 / d as f64;
            println!(
                "    d={d} k={k}: p̂ {:.4} ± {:.4} (closed form {want:.4}), per attempt {:.4} ± {:.4}, {secs:.1}s",
                s.p_hat, s.std_error, s.attempt_frequency, s.attempt_std_error
            );
            o.require((s.p_hat - want).abs() <= 3.0 * s.std_error, || format!("d={d} k={k}: p̂ {}", s.p_hat));
            o.require((s.attempt_frequency - q).abs() <= 3.0 * s.attempt_std_error, || {
                format!("d={d} k={k}: attempt frequency {}", s.attempt_frequency)
            });
            o.require(s.max_state_error <= EXACT, || format!("d={d} k={k}: state error {:.2e}", s.max_state_error));
            o.require(secs < 60.0, || format!("d={d} k={k}: {secs:.1}s"));
        }
    }
    o
}

fn unit_gaussian(ws: Vec<Wire>, rng: &mut ChaCha8Rng) -> LabeledOperator {
    let n: usize = ws.iter().map(|w| w.dim).product();
    let m = CMatrix::from_fn(n, n, |_, _| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)));
    let norm = m.norm();
    LabeledOperator::new(m / C64::new(norm, 0.0), ws).unwrap()
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for i in 0..50 {
        let par = random_parallel(2, 2, &mut rng).unwrap();
        let seq = random_sequential(2, 2, &mut rng).unwrap();
        let ok = check_parallel(&par, 2, 2).unwrap().overall
            && check_sequential(&par, 2, 2).unwrap().overall
            && check_general_k2(&par, 2).unwrap().overall
            && check_sequential(&seq, 2, 2).unwrap().overall
            && check_general_k2(&seq, 2).unwrap().overall;
        o.require(ok, || format!("hierarchy instance {i}"));
    }

    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let f = PROB[i % 4];
        let (d, k) = [(2, 1), (3, 1), (2, 2)][i % 3];
        let rep = f.covariance_rep(d, k);
        let mut ws: Vec<Wire> = hoqo::wires::inputs(k).into_iter().map(|l| Wire::new(l, d)).collect();
        ws.extend(hoqo::wires::outputs(k).into_iter().map(|l| Wire::new(l, d)));
        ws.push(Wire::new("F", d));
        let x = unit_gaussian(ws.clone(), &mut rng);
        let y = unit_gaussian(ws, &mut rng);
        let tx = twirl(&x, &rep).unwrap();
        let ty = twirl(&y, &rep).unwrap();
        let idem = twirl(&tx, &rep).unwrap().max_abs_diff(&tx).unwrap();
        let tr = (tx.trace() - x.trace()).norm();
        let adj = (y.hs_inner(&tx).unwrap() - ty.hs_inner(&x).unwrap()).norm();
        worst = worst.max(idem).max(tr).max(adj);
        o.require(idem.max(tr).max(adj) <= STRUCTURAL, || format!("twirl {f} d={d} k={k}: {idem:.1e} {tr:.1e} {adj:.1e}"));
    }

    for i in 0..50 {
        let (da, db, dc) = (2 + i % 2, 2 + (i / 2) % 2, 1 + (i / 4) % 3);
        let a = unit_gaussian(wires(&[("P", da), ("Q", db)]), &mut rng);
        let b = unit_gaussian(wires(&[("Q", db), ("R", dc)]), &mut rng);
        let c = unit_gaussian(wires(&[("R", dc), ("S", da)]), &mut rng);
        let ab = a.link(&b).unwrap();
        let assoc = ab.link(&c).unwrap().max_abs_diff(&a.link(&b.link(&c).unwrap()).unwrap()).unwrap();
        let comm = ab.max_abs_diff(&b.link(&a).unwrap().aligned_to(&ab).unwrap()).unwrap();
        worst = worst.max(assoc).max(comm);
        o.require(assoc.max(comm) <= STRUCTURAL, || format!("link triple {i}: {assoc:.1e} {comm:.1e}"));
    }
    println!("    worst twirl/link residual {worst:.2e}");

    let mut goldens = 0;
    for d in 2..=4 {
        let psi = random_psi(d, &mut rng);
        for f in PROB {
            for mode in [Mode::Prob, Mode::Det] {
                let r = golden(&pure(f, mode, d, &psi)).unwrap();
                let rep = verify_protocol(&r, 20, &mut rng).unwrap();
                goldens += 1;
                o.require(rep.overall, || format!("golden {f} {mode} d={d}: {:?}", rep.failures()));
            }
        }
    }
    println!("    {goldens} golden supermaps checked");
    o
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("closed-form values", criterion_1),
        ("defining-equation residuals", criterion_2),
        ("table reproduction", criterion_3),
        ("no-go checks", criterion_4),
        ("repeat-until-success", criterion_5),
        ("structural properties", criterion_6),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let secs = t.elapsed().as_secs_f64();
        if o.problems.is_empty() {
            println!("PASS criterion {}: {name} ({secs:.1}s)", i + 1);
        } else {
            failed += 1;
            println!("FAIL criterion {}: {name} ({secs:.1}s)", i + 1);
            for p in &o.problems {
                println!("    - {p}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
