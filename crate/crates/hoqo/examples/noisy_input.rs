// Deterministic exact protocols for a noisy input η|ψ⟩⟨ψ| + (1 − η)1/d exist
// exactly up to a visibility threshold η*.

use hoqo::protocols::{mixed_state_protocol, visibility_threshold, MixedOutcome};
use hoqo::task::{InputState, Target};
use hoqo::tensor::haar_unitary;
use hoqo::validity::verify_defining_equation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct ThresholdRow {
    pub f: Target,
    pub d: usize,
    pub eta_star: f64,
    pub residual: f64,
    /// Trace distance from the exact output at η* + 0.05.
    pub distance_above: f64,
}

pub fn run_example() -> hoqo::Result<Vec<ThresholdRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = Vec::new();
    for f in [Target::Trans, Target::Conj, Target::Inv] {
        for d in 2..=4 {
            let eta_star = visibility_threshold(f, d);
            if eta_star + 0.05 > 1.0 {
                continue;
            }
            let psi = haar_unitary(d, &mut rng)?.column(0).into_owned();
            let MixedOutcome::Exact(r) = mixed_state_protocol(f, d, &psi, eta_star)? else {
                unreachable!("the threshold itself is feasible");
            };
            let rep = verify_defining_equation(&r.supermap, &r.spec, Some(1.0), 20, &mut rng)?;
            let residual = rep.get("defining-eq-haar").map_or(f64::NAN, |c| c.residual);

            let eta = eta_star + 0.05;
            let distance_above = match mixed_state_protocol(f, d, &psi, eta)? {
                MixedOutcome::Infeasible { best, .. } => {
                    let spec = best.spec.with_state(InputState::Mixed { psi: psi.clone(), eta })?;
                    let u = haar_unitary(d, &mut rng)?;
                    best.apply(&u)?.trace_distance(&spec.target_output(&u)?)?
                }
                MixedOutcome::Exact(_) => 0.0,
            };
            println!("{f} d={d}: η* = {eta_star:.4}, residual {residual:.1e}, distance at η*+0.05 = {distance_above:.4}");
            rows.push(ThresholdRow { f, d, eta_star, residual, distance_above });
        }
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
