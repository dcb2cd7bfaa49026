use super::{c, CMatrix, CVector, LabeledOperator, Wire, C64};
use crate::error::Result;

/// Fixed two-register objects on C^d ⊗ C^d, as plain matrices.
#[derive(Clone, Debug)]
pub struct StandardObjects {
    pub d: usize,
    /// Unit-norm |φ+⟩ = Σ|ii⟩/√d.
    pub max_entangled: CVector,
    /// |1⟩⟩⟨⟨1| = d·|φ+⟩⟨φ+|.
    pub choi_identity: CMatrix,
    pub swap: CMatrix,
    pub sym_proj: CMatrix,
    pub antisym_proj: CMatrix,
}

pub fn standard_objects(d: usize) -> StandardObjects {
    let n = d * d;
    let mut phi = CVector::zeros(n);
    for i in 0..d {
        phi[i * d + i] = c(1.0 / (d as f64).sqrt());
    }
    let choi_identity = &phi * phi.adjoint() * c(d as f64);
    let swap = CMatrix::from_fn(n, n, |r, col| {
        let (a, b) = (r / d, r % d);
        if col == b * d + a {
            c(1.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let id = CMatrix::identity(n, n);
    let sym_proj = (&id + &swap) * c(0.5);
    let antisym_proj = (&id - &swap) * c(0.5);
    StandardObjects {
        d,
        max_entangled: phi,
        choi_identity,
        swap,
        sym_proj,
        antisym_proj,
    }
}

fn pair(m: CMatrix, d: usize, a: &str, b: &str) -> Result<LabeledOperator> {
    LabeledOperator::new(m, vec![Wire::new(a, d), Wire::new(b, d)])
}

pub fn max_entangled(d: usize) -> CVector {
    standard_objects(d).max_entangled
}

/// |φ+⟩⟨φ+| on wires (a, b).
pub fn max_entangled_projector(d: usize, a: &str, b: &str) -> Result<LabeledOperator> {
    let phi = max_entangled(d);
    pair(&phi * phi.adjoint(), d, a, b)
}

pub fn choi_identity(d: usize, a: &str, b: &str) -> Result<LabeledOperator> {
    pair(standard_objects(d).choi_identity, d, a, b)
}

pub fn swap(d: usize, a: &str, b: &str) -> Result<LabeledOperator> {
    pair(standard_objects(d).swap, d, a, b)
}

pub fn sym_proj(d: usize, a: &str, b: &str) -> Result<LabeledOperator> {
    pair(standard_objects(d).sym_proj, d, a, b)
}

pub fn antisym_proj(d: usize, a: &str, b: &str) -> Result<LabeledOperator> {
    pair(standard_objects(d).antisym_proj, d, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projector_traces() {
        for d in 2..6 {
            let o = standard_objects(d);
            let ds = (d * (d + 1) / 2) as f64;
            let da = (d * (d - 1) / 2) as f64;
            assert!((o.sym_proj.trace().re - ds).abs() < 1e-12);
            assert!((o.antisym_proj.trace().re - da).abs() < 1e-12);
            assert!((&o.sym_proj * &o.antisym_proj).norm() < 1e-12);
            let id = CMatrix::identity(d * d, d * d);
            assert!((&o.sym_proj + &o.antisym_proj - id).norm() < 1e-12);
            assert!((o.max_entangled.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qubit_projector_ranks() {
        let o = standard_objects(2);
        assert!((o.sym_proj.trace().re - 3.0).abs() < 1e-12);
        assert!((o.antisym_proj.trace().re - 1.0).abs() < 1e-12);
    }
}
