use rand::Rng;
use rand_distr::StandardNormal;

use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of R's
/// diagonal folded back into Q.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CMatrix> {
    if d == 0 {
        return Err(Error::InvalidInput("unitary dimension must be at least 1".into()));
    }
    let g = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// U / det(U)^{1/d} on the principal branch.
pub fn to_special_unitary(u: &CMatrix) -> CMatrix {
    let d = u.nrows() as f64;
    let det = u.determinant();
    let root = det.powf(1.0 / d);
    u / root
}
