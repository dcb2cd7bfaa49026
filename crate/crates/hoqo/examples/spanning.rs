// Spanning sets of {|U⟩⟩⟨⟨U|^{⊗k}} and membership tests for the three strategy classes.

use hoqo::task::Strategy;
use hoqo::validity::{check_class, random_parallel, random_sequential, spanning_set};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct SpanRow {
    pub d: usize,
    pub k: usize,
    pub rank: usize,
}

pub struct SpanningSummary {
    pub ranks: Vec<SpanRow>,
    /// (drawn as, tested against, passed)
    pub memberships: Vec<(Strategy, Strategy, bool)>,
}

pub fn run_example() -> hoqo::Result<SpanningSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ranks = Vec::new();
    for (d, k) in [(2, 1), (3, 1), (2, 2), (2, 3)] {
        let s = spanning_set(d, k, &mut rng)?;
        println!("d={d} k={k}: rank {} from {} unitaries", s.rank, s.unitaries.len());
        ranks.push(SpanRow { d, k, rank: s.rank });
    }

    let (d, k) = (2, 2);
    let par = random_parallel(d, k, &mut rng)?;
    let seq = random_sequential(d, k, &mut rng)?;
    let mut memberships = Vec::new();
    for (name, drawn, s) in [("parallel", Strategy::Parallel, &par), ("sequential", Strategy::Sequential, &seq)] {
        for class in Strategy::ALL {
            let ok = check_class(s, class, d, k)?.overall;
            println!("random {name} supermap in {class}: {ok}");
            memberships.push((drawn, class, ok));
        }
    }
    Ok(SpanningSummary { ranks, memberships })
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
