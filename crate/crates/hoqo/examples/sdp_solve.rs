// The first-order SDP solver: a small custom problem, then the optimal two-slot
// transposition found numerically and checked as a protocol.

use std::sync::Arc;

use hoqo::sdp::{build_instance, solve, Block, Cone, Equality, ProblemKind, SdpProblem, TableInstance, TableOptions, Whole};
use hoqo::task::{Mode, Strategy, Target};
use hoqo::validity::{check_class, verify_defining_equation};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct SolveSummary {
    pub max_eigenvalue: f64,
    pub solver_eigenvalue: f64,
    pub value: f64,
    pub iterations: usize,
    pub defining_residual: f64,
    /// Largest class-constraint residual of S_ch; of the order of the solver tolerance.
    pub class_residual: f64,
}

pub fn run_example() -> hoqo::Result<SolveSummary> {
    // max ⟨C, X⟩ over density matrices is the top eigenvalue of C
    let c = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 1.0]);
    let max_eigenvalue = c.clone().symmetric_eigen().eigenvalues.max();
    let p = SdpProblem::new(
        "eigenvalue",
        vec![Block::new("X", 3, Cone::Psd)],
        vec![c],
        Arc::new(Whole),
        vec![Equality { coeffs: vec![DMatrix::identity(3, 3)], rhs: 1.0 }],
        ProblemKind::Custom,
        None,
    )?;
    let sol = solve(&p, &Default::default())?.require_converged()?;
    println!("λ_max = {max_eigenvalue:.6}, solver {:.6}", sol.value);

    let inst = TableInstance::new(Target::Trans, hoqo::sdp::Quantity::P, 2, 2, Strategy::Parallel);
    let opts = TableOptions::default();
    let problem = build_instance(&inst, &opts)?;
    let s = solve(&problem, &opts.tol)?.require_converged()?;
    println!("{inst}: p = {:.6} after {} iterations ({:.2}s)", s.value, s.iterations, s.seconds);

    // the optimizer is itself a protocol: feed it back through the checks
    let spec = inst.spec()?;
    assert_eq!(spec.mode, Mode::Prob);
    let supermap = problem.supermap(&s.blocks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rep = verify_defining_equation(&supermap, &spec, Some(s.value), 20, &mut rng)?;
    let defining_residual = rep.get("defining-eq-haar").map_or(f64::NAN, |c| c.residual);
    // second block is S_ch − S
    let total = problem.supermap(&[&s.blocks[0] + &s.blocks[1]])?;
    let class_residual = check_class(&total, Strategy::Parallel, 2, 2)?
        .checks
        .iter()
        .map(|c| if c.name.ends_with("psd") { (-c.residual).max(0.0) } else { c.residual.abs() })
        .fold(0.0, f64::max);
    println!("defining equation residual {defining_residual:.1e}, superchannel class residual {class_residual:.1e}");
    Ok(SolveSummary {
        max_eigenvalue,
        solver_eigenvalue: sol.value,
        value: s.value,
        iterations: s.iterations,
        defining_residual,
        class_residual,
    })
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
