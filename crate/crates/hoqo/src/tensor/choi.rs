use super::{CMatrix, CVector, LabeledOperator, Wire, C64};
use crate::error::Result;
use crate::wires;

/// |M⟩⟩ = Σ_i |i⟩_in ⊗ M|i⟩_out.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiVector {
    pub amplitudes: CVector,
    pub wires: [Wire; 2],
}

impl ChoiVector {
    /// |M⟩⟩⟨⟨M| as a labelled operator.
    pub fn projector(&self) -> LabeledOperator {
        LabeledOperator::projector(&self.amplitudes, self.wires.to_vec())
            .expect("choi vector wires are consistent by construction")
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }
}

pub fn choi_vector(m: &CMatrix, in_label: &str, out_label: &str) -> ChoiVector {
    let (d_out, d_in) = m.shape();
    let mut v = CVector::zeros(d_in * d_out);
    for i in 0..d_in {
        for o in 0..d_out {
            v[i * d_out + o] = m[(o, i)];
        }
    }
    ChoiVector {
        amplitudes: v,
        wires: [Wire::new(in_label, d_in), Wire::new(out_label, d_out)],
    }
}

/// |U⟩⟩⟨⟨U|^{⊗k} on wires I…, O… in canonical order.
pub fn choi_power(u: &CMatrix, k: usize) -> Result<LabeledOperator> {
    let mut acc = LabeledOperator::scalar(C64::new(1.0, 0.0));
    for j in 0..k {
        let cv = choi_vector(u, &wires::input(j, k), &wires::output(j, k));
        acc = acc.kron(&cv.projector())?;
    }
    acc.canonical()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_choi_vector() {
        let v = choi_vector(&CMatrix::identity(2, 2), "I", "O");
        let expect: Vec<f64> = vec![1.0, 0.0, 0.0, 1.0];
        for (a, b) in v.amplitudes.iter().zip(expect) {
            assert_eq!(*a, C64::new(b, 0.0));
        }
        assert_eq!(v.wires[0], Wire::new("I", 2));
    }

    #[test]
    fn pauli_x_choi_vector() {
        let x = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        );
        let v = choi_vector(&x, "I", "O");
        let got: Vec<f64> = v.amplitudes.iter().map(|z| z.re).collect();
        assert_eq!(got, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn power_wires_are_canonical() {
        let c = choi_power(&CMatrix::identity(2, 2), 2).unwrap();
        assert_eq!(c.labels(), vec!["I1", "I2", "O1", "O2"]);
        assert!((c.trace().re - 4.0).abs() < 1e-12);
    }
}
