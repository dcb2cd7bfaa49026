// Transposition of one half of a known entangled state: the success probability
// 1/(d‖σ‖) depends only on the largest Schmidt weight.

use hoqo::protocols::golden;
use hoqo::task::{InputState, Mode, ProtocolSpec, Strategy, Target};
use hoqo::twirl::performance_operator;
use hoqo::validity::verify_protocol;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct BipartiteRow {
    pub weights: Vec<f64>,
    pub value: f64,
    /// Tr(S Ω)
    pub overlap: f64,
    pub passed: bool,
}

pub fn run_example() -> hoqo::Result<Vec<BipartiteRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spectra: [&[f64]; 5] = [&[1.0], &[0.9, 0.1], &[0.5, 0.5], &[0.6, 0.3, 0.1], &[1.0, 1.0, 1.0]];
    let mut rows = Vec::new();
    for w in spectra {
        let d = w.len().max(2);
        let state = InputState::schmidt(d, w)?;
        let spec = ProtocolSpec::new(Target::Trans, Mode::Prob, d, 1, Strategy::Parallel, state)?;
        let r = golden(&spec)?;
        let overlap = r.supermap.hs_inner(&performance_operator(&spec)?)?.re;
        let report = verify_protocol(&r, 20, &mut rng)?;
        if !report.overall {
            eprintln!("{}", report.render());
        }
        println!("d={d} weights {w:?}: p = {:.6}, Tr(SΩ) = {overlap:.6}, checks {}", r.value, report.overall);
        rows.push(BipartiteRow { weights: w.to_vec(), value: r.value, overlap, passed: report.overall });
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
