// Choi operators and the link product: composing two unitaries by linking
// their Choi operators on the shared wire gives the Choi operator of the product.

use hoqo::tensor::{choi_identity, choi_vector, haar_unitary, swap, sym_proj, LabeledOperator, Wire};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct ChoiSummary {
    pub composition_error: f64,
    pub identity_link_error: f64,
    pub swap_trace: f64,
    pub sym_rank: f64,
}

pub fn run_example() -> hoqo::Result<ChoiSummary> {
    let d = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = haar_unitary(d, &mut rng)?;
    let v = haar_unitary(d, &mut rng)?;

    // |U⟩⟩ on (A, B) and |V⟩⟩ on (B, C)
    let cu = choi_vector(&u, "A", "B").projector();
    let cv = choi_vector(&v, "B", "C").projector();
    let linked = cu.link(&cv)?;
    let direct = choi_vector(&(&v * &u), "A", "C").projector();
    let composition_error = linked.max_abs_diff(&direct)?;

    // the identity channel is the unit of the link product
    let id = choi_identity(d, "C", "D")?;
    let identity_link_error = linked.link(&id)?.relabel(&[("D", "C")])?.max_abs_diff(&direct)?;

    let sw = swap(d, "X", "Y")?;
    let sym = sym_proj(d, "X", "Y")?;
    let one = LabeledOperator::identity(vec![Wire::new("X", d), Wire::new("Y", d)])?;
    println!("‖|U⟩⟩*|V⟩⟩ − |VU⟩⟩‖ = {composition_error:.2e}");
    println!("link with identity: {identity_link_error:.2e}");
    println!("Tr SWAP = {:.1}, Tr P_sym = {:.1}, Tr 1 = {:.1}", sw.trace().re, sym.trace().re, one.trace().re);
    Ok(ChoiSummary {
        composition_error,
        identity_link_error,
        swap_trace: sw.trace().re,
        sym_rank: sym.trace().re,
    })
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
