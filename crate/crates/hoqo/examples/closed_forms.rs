// Optimal single-call protocols for every target on a random pure input,
// each checked against its defining equation and the structural conditions.

use hoqo::protocols::golden;
use hoqo::task::{InputState, Mode, ProtocolSpec, Strategy, Target};
use hoqo::tensor::haar_unitary;
use hoqo::validity::verify_protocol;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Row {
    pub f: Target,
    pub mode: Mode,
    pub d: usize,
    pub value: f64,
    pub passed: bool,
}

pub fn run_example() -> hoqo::Result<Vec<Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    println!("{:<6} {:<5} {:>2} {:>9}  checks", "f", "mode", "d", "value");
    for d in 2..=4 {
        let psi = haar_unitary(d, &mut rng)?.column(0).into_owned();
        for f in [Target::Trans, Target::Conj, Target::Inv, Target::Sar] {
            for mode in [Mode::Prob, Mode::Det] {
                let spec = ProtocolSpec::new(f, mode, d, 1, Strategy::Parallel, InputState::Pure { psi: psi.clone() })?;
                let r = golden(&spec)?;
                let report = verify_protocol(&r, 20, &mut rng)?;
                println!(
                    "{:<6} {:<5} {:>2} {:>9.6}  {}",
                    f.name(),
                    mode.to_string(),
                    d,
                    r.value,
                    if report.overall { "ok" } else { "FAIL" }
                );
                rows.push(Row { f, mode, d, value: r.value, passed: report.overall });
            }
        }
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
