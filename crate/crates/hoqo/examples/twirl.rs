// Group twirls: the exact commutant projection against a Monte Carlo Haar average,
// and the performance operator Ω whose overlap with S gives the figure of merit.

use hoqo::task::{Mode, ProtocolSpec, Target};
use hoqo::tensor::wires;
use hoqo::twirl::{performance_operator, twirl, twirl_monte_carlo, CommutantBasis};
use hoqo::validity::random_state;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct TwirlSummary {
    pub commutant_dim: usize,
    pub idempotence: f64,
    pub trace_change: f64,
    pub monte_carlo_gap: f64,
    pub omega_trace: f64,
}

pub fn run_example() -> hoqo::Result<TwirlSummary> {
    let d = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rep = Target::Trans.covariance_rep(d, 1);
    let x = random_state(&wires(&[("I", d), ("O", d), ("F", d)]), &mut rng)?;

    let basis = CommutantBasis::new(&rep)?;
    let t = twirl(&x, &rep)?;
    let idempotence = twirl(&t, &rep)?.max_abs_diff(&t)?;
    let trace_change = (t.trace() - x.trace()).norm();
    let mc = twirl_monte_carlo(&x, &rep, 4000, &mut rng)?;
    let monte_carlo_gap = mc.max_abs_diff(&t)?;
    println!("commutant of U⊗Ū on (I, F): {} elements", basis.len());
    println!("‖T(T(X)) − T(X)‖ = {idempotence:.2e}, |Tr T(X) − Tr X| = {trace_change:.2e}");
    println!("exact vs 4000-sample average: {monte_carlo_gap:.3e}");

    // twirling keeps Tr(|1⟩⟩⟨⟨1| ⊗ ψψ†) = d
    let omega = performance_operator(&ProtocolSpec::simple(Target::Trans, Mode::Prob, d)?)?;
    let omega_trace = omega.trace().re;
    println!("Tr Ω = {omega_trace:.6}");
    Ok(TwirlSummary {
        commutant_dim: basis.len(),
        idempotence,
        trace_change,
        monte_carlo_gap,
        omega_trace,
    })
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
