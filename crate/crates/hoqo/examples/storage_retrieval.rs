// Storage-and-retrieval of U from a transposition protocol and back, by
// transposing the slot output wire.

use hoqo::protocols::{golden, sar_convert, Direction};
use hoqo::task::{InputState, Mode, ProtocolSpec, Strategy, Target};
use hoqo::tensor::haar_unitary;
use hoqo::twirl::performance_operator;
use hoqo::validity::verify_protocol;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct SarRow {
    pub mode: Mode,
    pub d: usize,
    pub trans_value: f64,
    pub sar_value: f64,
    pub round_trip: f64,
    pub passed: bool,
}

pub fn run_example() -> hoqo::Result<Vec<SarRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rows = Vec::new();
    for d in [2, 3] {
        let psi = haar_unitary(d, &mut rng)?.column(0).into_owned();
        for mode in [Mode::Prob, Mode::Det] {
            let spec = ProtocolSpec::new(Target::Trans, mode, d, 1, Strategy::Parallel, InputState::Pure { psi: psi.clone() })?;
            let t = golden(&spec)?;
            let s = sar_convert(&t, Direction::ToSar)?;
            let sar_value = s.supermap.hs_inner(&performance_operator(&s.spec)?)?.re;
            let back = sar_convert(&s, Direction::ToTransposition)?;
            let round_trip = back.supermap.max_abs_diff(&t.supermap)?;
            let passed = verify_protocol(&s, 20, &mut rng)?.overall;
            println!("{mode} d={d}: trans {:.6} → sar {sar_value:.6}, round trip {round_trip:.1e}", t.value);
            rows.push(SarRow { mode, d, trans_value: t.value, sar_value, round_trip, passed });
        }
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
