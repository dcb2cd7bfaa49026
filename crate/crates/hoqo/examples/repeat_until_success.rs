// Repeat-until-success transposition: up to k independent single-call attempts
// on the same unknown U, stopping at the first heralded success.

use hoqo::rus::{depolarizing, rounds_saved, simulate, ChannelModel, RusConfig, RusStats};
use hoqo::task::InputState;

pub fn run_example() -> hoqo::Result<Vec<RusStats>> {
    let mut out = Vec::new();
    println!("{:>2} {:>2} {:>8} {:>8} {:>7} {:>6}", "d", "k", "p̂", "1-(1-1/d)^k", "±SE", "saved");
    for d in [2, 3] {
        for k in 1..=3 {
            let s = simulate(&RusConfig::pure(d, k, 20_000, 9))?;
            println!(
                "{d:>2} {k:>2} {:>8.4} {:>8.4} {:>7.4} {:>6.3}",
                s.p_hat,
                s.closed_form,
                s.std_error,
                rounds_saved(&s)
            );
            out.push(s);
        }
    }

    // entangled input: success per call 1/(d‖σ‖)
    let mut cfg = RusConfig::pure(2, 2, 20_000, 10);
    cfg.input = InputState::schmidt(2, &[0.9, 0.1])?;
    let s = simulate(&cfg)?;
    println!("Schmidt (0.9, 0.1), k=2: p̂ = {:.4}, closed form {:.4}", s.p_hat, s.closed_form);
    out.push(s);

    // depolarizing noise is a mixture of unitaries, so the herald still fires at rate 1/d
    let mut cfg = RusConfig::pure(2, 1, 20_000, 11);
    cfg.channel = ChannelModel::Fixed(depolarizing(2, 0.5)?);
    let s = simulate(&cfg)?;
    println!("depolarizing λ=0.5, k=1: p̂ = {:.4}", s.p_hat);
    out.push(s);
    Ok(out)
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
