//! Subsystem-labelled dense complex operators and the Choi calculus built on them.

mod choi;
mod haar;
pub(crate) mod index;
mod objects;

pub use choi::{choi_power, choi_vector, ChoiVector};
pub use haar::{haar_unitary, to_special_unitary};
pub use objects::{
    antisym_proj, choi_identity, max_entangled, max_entangled_projector, standard_objects, swap,
    sym_proj, StandardObjects,
};

use nalgebra::{ComplexField, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Wire {
    pub label: String,
    pub dim: usize,
}

impl Wire {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Wire {
            label: label.into(),
            dim,
        }
    }
}

/// Shorthand for building wire lists: `wires(&[("I", 2), ("O", 2)])`.
pub fn wires(spec: &[(&str, usize)]) -> Vec<Wire> {
    spec.iter().map(|(l, d)| Wire::new(*l, *d)).collect()
}

/// A square complex matrix acting on an ordered tensor product of named wires.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    entries: CMatrix,
    wires: Vec<Wire>,
}

impl LabeledOperator {
    pub fn new(entries: CMatrix, wires: Vec<Wire>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for w in &wires {
            if w.dim == 0 {
                return Err(Error::Dimension(format!("wire `{}` has dimension 0", w.label)));
            }
            if !seen.insert(w.label.as_str()) {
                return Err(Error::DuplicateLabel(w.label.clone()));
            }
        }
        let n: usize = wires.iter().map(|w| w.dim).product();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Dimension(format!(
                "array is {}x{} but wires multiply to {}",
                entries.nrows(),
                entries.ncols(),
                n
            )));
        }
        Ok(LabeledOperator { entries, wires })
    }

    pub fn identity(wires: Vec<Wire>) -> Result<Self> {
        let n = wires.iter().map(|w| w.dim).product();
        Self::new(CMatrix::identity(n, n), wires)
    }

    pub fn zeros(wires: Vec<Wire>) -> Result<Self> {
        let n = wires.iter().map(|w| w.dim).product();
        Self::new(CMatrix::zeros(n, n), wires)
    }

    pub fn scalar(value: C64) -> Self {
        LabeledOperator {
            entries: CMatrix::from_element(1, 1, value),
            wires: Vec::new(),
        }
    }

    /// |v⟩⟨v| on the given wires.
    pub fn projector(v: &CVector, wires: Vec<Wire>) -> Result<Self> {
        Self::new(v * v.adjoint(), wires)
    }

    pub fn from_real(entries: &DMatrix<f64>, wires: Vec<Wire>) -> Result<Self> {
        Self::new(entries.map(c), wires)
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn labels(&self) -> Vec<&str> {
        self.wires.iter().map(|w| w.label.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.wires.iter().map(|w| w.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.wires
            .iter()
            .position(|w| w.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.wires.iter().any(|w| w.label == label)
    }

    pub fn wire_dim(&self, label: &str) -> Result<usize> {
        Ok(self.wires[self.position(label)?].dim)
    }

    fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l)?;
            if out.contains(&p) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Renames wires; all renames apply at once, so swaps like [(I, O), (O, I)] work.
    pub fn relabel(mut self, map: &[(&str, &str)]) -> Result<Self> {
        let from: Vec<&str> = map.iter().map(|(f, _)| *f).collect();
        let pos = self.positions(&from)?;
        for (p, (_, to)) in pos.into_iter().zip(map) {
            self.wires[p].label = to.to_string();
        }
        Self::new(self.entries, self.wires)
    }

    pub fn scale(&self, s: C64) -> Self {
        LabeledOperator {
            entries: &self.entries * s,
            wires: self.wires.clone(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c(s))
    }

    pub fn adjoint(&self) -> Self {
        LabeledOperator {
            entries: self.entries.adjoint(),
            wires: self.wires.clone(),
        }
    }

    /// Tensor product; the result carries self's wires followed by other's.
    pub fn kron(&self, other: &LabeledOperator) -> Result<Self> {
        for w in &other.wires {
            if self.has_label(&w.label) {
                return Err(Error::DuplicateLabel(w.label.clone()));
            }
        }
        let mut wires = self.wires.clone();
        wires.extend(other.wires.iter().cloned());
        Self::new(self.entries.kronecker(&other.entries), wires)
    }

    /// Reorders wires to `order`, which must be a permutation of the current labels.
    pub fn permuted(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.wires.len() {
            return Err(Error::InvalidInput(format!(
                "permutation lists {} labels, operator has {}",
                order.len(),
                self.wires.len()
            )));
        }
        let pos = self.positions(order)?;
        if pos.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let map = index::permutation_map(&self.dims(), &pos);
        let n = self.dim();
        let e = &self.entries;
        let out = CMatrix::from_fn(n, n, |i, j| e[(map[i], map[j])]);
        let wires = pos.iter().map(|&p| self.wires[p].clone()).collect();
        Self::new(out, wires)
    }

    /// Same operator with wires aligned to `other`'s order (label sets must agree).
    pub fn aligned_to(&self, other: &LabeledOperator) -> Result<Self> {
        let order = other.labels();
        let me = self.permuted(&order)?;
        if me.wires != other.wires {
            return Err(Error::Dimension("wire dimensions differ".into()));
        }
        Ok(me)
    }

    /// Sorts wires into the canonical role order I…, O…, F, A, M, then anything else.
    pub fn canonical(&self) -> Result<Self> {
        let mut order: Vec<&str> = self.labels();
        order.sort_by_key(|a| crate::wires::canonical_key(a));
        self.permuted(&order)
    }

    pub fn add(&self, other: &LabeledOperator) -> Result<Self> {
        let o = other.aligned_to(self)?;
        Ok(LabeledOperator {
            entries: &self.entries + &o.entries,
            wires: self.wires.clone(),
        })
    }

    pub fn sub(&self, other: &LabeledOperator) -> Result<Self> {
        let o = other.aligned_to(self)?;
        Ok(LabeledOperator {
            entries: &self.entries - &o.entries,
            wires: self.wires.clone(),
        })
    }

    /// Product self·other after aligning other's wires to self.
    pub fn mul(&self, other: &LabeledOperator) -> Result<Self> {
        let o = other.aligned_to(self)?;
        Ok(LabeledOperator {
            entries: &self.entries * &o.entries,
            wires: self.wires.clone(),
        })
    }

    pub fn partial_trace(&self, labels: &[&str]) -> Result<Self> {
        let traced = self.positions(labels)?;
        let dims = self.dims();
        let kept: Vec<usize> = (0..self.wires.len()).filter(|p| !traced.contains(p)).collect();
        let koff = index::sub_offsets(&dims, &kept);
        let toff = index::sub_offsets(&dims, &traced);
        let nk = koff.len();
        let e = &self.entries;
        let out = CMatrix::from_fn(nk, nk, |i, j| {
            toff.iter()
                .map(|&t| e[(koff[i] + t, koff[j] + t)])
                .sum::<C64>()
        });
        let wires = kept.iter().map(|&p| self.wires[p].clone()).collect();
        Self::new(out, wires)
    }

    pub fn partial_transpose(&self, labels: &[&str]) -> Result<Self> {
        let sel = self.positions(labels)?;
        let (tpart, rest) = index::split_offsets(&self.dims(), &sel);
        let n = self.dim();
        let e = &self.entries;
        let out = CMatrix::from_fn(n, n, |i, j| e[(rest[i] + tpart[j], rest[j] + tpart[i])]);
        Self::new(out, self.wires.clone())
    }

    /// Tr_X(A) ⊗ 1_X / d_X, keeping the wire order.
    pub fn trace_replace(&self, labels: &[&str]) -> Result<Self> {
        let sel = self.positions(labels)?;
        let dims = self.dims();
        let dx: usize = sel.iter().map(|&p| dims[p]).product();
        let (tpart, rest) = index::split_offsets(&dims, &sel);
        let toff = index::sub_offsets(&dims, &sel);
        let n = self.dim();
        let e = &self.entries;
        let out = CMatrix::from_fn(n, n, |i, j| {
            if tpart[i] != tpart[j] {
                return C64::new(0.0, 0.0);
            }
            toff.iter().map(|&t| e[(rest[i] + t, rest[j] + t)]).sum::<C64>() / dx as f64
        });
        Self::new(out, self.wires.clone())
    }

    /// Link product Tr_shared[(A^{T_shared} ⊗ 1)(1 ⊗ B)]; result wires are A's unshared
    /// wires followed by B's unshared wires.
    pub fn link(&self, other: &LabeledOperator) -> Result<Self> {
        let shared: Vec<&str> = self
            .labels()
            .into_iter()
            .filter(|l| other.has_label(l))
            .collect();
        for l in &shared {
            if self.wire_dim(l)? != other.wire_dim(l)? {
                return Err(Error::Dimension(format!(
                    "shared wire `{l}` has dims {} and {}",
                    self.wire_dim(l)?,
                    other.wire_dim(l)?
                )));
            }
        }
        let a_only: Vec<&str> = self.labels().into_iter().filter(|l| !shared.contains(l)).collect();
        let b_only: Vec<&str> = other.labels().into_iter().filter(|l| !shared.contains(l)).collect();
        let mut a_order = a_only.clone();
        a_order.extend(shared.iter().copied());
        let mut b_order = shared.clone();
        b_order.extend(b_only.iter().copied());
        let a = self.permuted(&a_order)?;
        let b = other.permuted(&b_order)?;
        let da: usize = a_only.iter().map(|l| self.wire_dim(l).unwrap()).product();
        let db: usize = b_only.iter().map(|l| other.wire_dim(l).unwrap()).product();
        let ds: usize = shared.iter().map(|l| self.wire_dim(l).unwrap()).product();

        // A'[(a1,a2),(s',s)] = A[(a1 s'),(a2 s)],  B'[(s',s),(b1,b2)] = B[(s' b1),(s b2)]
        let ae = a.entries();
        let be = b.entries();
        let ap = CMatrix::from_fn(da * da, ds * ds, |r, col| {
            let (a1, a2) = (r / da, r % da);
            let (s1, s2) = (col / ds, col % ds);
            ae[(a1 * ds + s1, a2 * ds + s2)]
        });
        let bp = CMatrix::from_fn(ds * ds, db * db, |r, col| {
            let (s1, s2) = (r / ds, r % ds);
            let (b1, b2) = (col / db, col % db);
            be[(s1 * db + b1, s2 * db + b2)]
        });
        let rp = ap * bp;
        let n = da * db;
        let out = CMatrix::from_fn(n, n, |i, j| {
            let (a1, b1) = (i / db, i % db);
            let (a2, b2) = (j / db, j % db);
            rp[(a1 * da + a2, b1 * db + b2)]
        });
        let mut wires: Vec<Wire> = a_only
            .iter()
            .map(|l| Wire::new(*l, self.wire_dim(l).unwrap()))
            .collect();
        wires.extend(b_only.iter().map(|l| Wire::new(*l, other.wire_dim(l).unwrap())));
        Self::new(out, wires)
    }

    /// Applies `ops` on their wires from the left and their adjoints from the right:
    /// X ↦ (⊗ A_w) X (⊗ A_w)†, identity elsewhere.
    pub fn conjugated_by(&self, ops: &[(&str, &CMatrix)]) -> Result<Self> {
        let mut e = self.entries.clone();
        let dims = self.dims();
        let st = index::strides(&dims);
        for (label, a) in ops {
            let p = self.position(label)?;
            let d = dims[p];
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::Dimension(format!("local operator on `{label}` must be {d}x{d}")));
            }
            e = apply_left(&e, a, st[p], d);
            e = apply_left(&e.adjoint(), a, st[p], d).adjoint();
        }
        Self::new(e, self.wires.clone())
    }

    /// (⊗ A_w) X without the adjoint on the right.
    pub fn left_multiplied_by(&self, ops: &[(&str, &CMatrix)]) -> Result<Self> {
        let mut e = self.entries.clone();
        let dims = self.dims();
        let st = index::strides(&dims);
        for (label, a) in ops {
            let p = self.position(label)?;
            e = apply_left(&e, a, st[p], dims[p]);
        }
        Self::new(e, self.wires.clone())
    }

    pub fn hermitian_defect(&self) -> f64 {
        let e = &self.entries;
        let n = e.nrows();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                m = m.max((e[(i, j)] - e[(j, i)].conj()).norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= HERMITIAN_TOL
    }

    pub fn hermitian_part(&self) -> Self {
        LabeledOperator {
            entries: (&self.entries + self.entries.adjoint()) * c(0.5),
            wires: self.wires.clone(),
        }
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.hermitian_part().entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// ½‖self − other‖₁ of the Hermitian parts.
    pub fn trace_distance(&self, other: &LabeledOperator) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(0.5 * d.eigenvalues().iter().map(|v| v.abs()).sum::<f64>())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Largest entrywise modulus of self − other (other aligned to self).
    pub fn max_abs_diff(&self, other: &LabeledOperator) -> Result<f64> {
        let o = other.aligned_to(self)?;
        Ok((&self.entries - &o.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    /// Hilbert–Schmidt inner product Tr(self† other).
    pub fn hs_inner(&self, other: &LabeledOperator) -> Result<C64> {
        let o = other.aligned_to(self)?;
        Ok(self
            .entries
            .iter()
            .zip(o.entries.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Real part of the entries, for the real-symmetric SDP parameterization.
    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }
}

/// Left-multiplies the wire with stride `stride` and dimension `d` by `a`.
/// `symmetric_eigen` with a retry: nalgebra's QR iteration occasionally breaks down
/// into NaN on exactly structured inputs, and a diagonal shift avoids it without
/// changing the eigenvectors.
pub fn robust_eigen<T>(h: &DMatrix<T>) -> SymmetricEigen<T, Dyn>
where
    T: ComplexField<RealField = f64>,
{
    let finite = |e: &SymmetricEigen<T, Dyn>| {
        e.eigenvalues.iter().all(|v| v.is_finite()) && e.eigenvectors.iter().all(|z| z.clone().is_finite())
    };
    let e = h.clone().symmetric_eigen();
    if finite(&e) {
        return e;
    }
    let n = h.nrows();
    let scale = 1.0 + h.iter().map(|z| z.clone().modulus()).fold(0.0, f64::max);
    for shift in [0.1234567, -0.3217913, 0.6180827] {
        let mut m = h.clone();
        for i in 0..n {
            m[(i, i)] += T::from_real(shift * scale);
        }
        let mut e = m.symmetric_eigen();
        if finite(&e) {
            e.eigenvalues.apply(|v| *v -= shift * scale);
            return e;
        }
    }
    e
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = robust_eigen(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn apply_left(x: &CMatrix, a: &CMatrix, stride: usize, d: usize) -> CMatrix {
    let n = x.nrows();
    let mut out = CMatrix::zeros(n, x.ncols());
    for r in 0..n {
        let digit = (r / stride) % d;
        let base = r - digit * stride;
        for j in 0..d {
            let coef = a[(digit, j)];
            if coef == C64::new(0.0, 0.0) {
                continue;
            }
            let src = base + j * stride;
            for col in 0..x.ncols() {
                out[(r, col)] += coef * x[(src, col)];
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct OperatorDoc {
    wires: Vec<Wire>,
    /// Row-major (re, im) pairs.
    entries: Vec<[f64; 2]>,
}

impl Serialize for LabeledOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        OperatorDoc {
            wires: self.wires.clone(),
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = OperatorDoc::deserialize(d)?;
        let n: usize = doc.wires.iter().map(|w| w.dim).product();
        if doc.entries.len() != n * n {
            return Err(serde::de::Error::custom(format!(
                "expected {} entries, found {}",
                n * n,
                doc.entries.len()
            )));
        }
        let m = CMatrix::from_fn(n, n, |i, j| {
            let [re, im] = doc.entries[i * n + j];
            C64::new(re, im)
        });
        LabeledOperator::new(m, doc.wires).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(m: CMatrix, spec: &[(&str, usize)]) -> LabeledOperator {
        LabeledOperator::new(m, wires(spec)).unwrap()
    }

    fn counting(n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| C64::new((i * n + j) as f64, (i as f64) - (j as f64)))
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LabeledOperator::new(CMatrix::zeros(3, 3), wires(&[("A", 2)])).is_err());
        assert!(LabeledOperator::new(CMatrix::zeros(4, 4), wires(&[("A", 2), ("A", 2)])).is_err());
    }

    #[test]
    fn permute_round_trip() {
        let x = op(counting(12), &[("A", 2), ("B", 3), ("C", 2)]);
        let y = x.permuted(&["C", "A", "B"]).unwrap();
        let back = y.permuted(&["A", "B", "C"]).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn permute_matches_kron_order() {
        let a = CMatrix::from_fn(2, 2, |i, j| C64::new((i + 2 * j) as f64, 0.0));
        let b = CMatrix::from_fn(3, 3, |i, j| C64::new(1.0 + (i * j) as f64, 0.5));
        let ab = op(a.kronecker(&b), &[("A", 2), ("B", 3)]);
        let ba = ab.permuted(&["B", "A"]).unwrap();
        assert_eq!(ba.entries(), &b.kronecker(&a));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = CMatrix::from_fn(2, 2, |i, j| C64::new((1 + i + j) as f64, 0.0));
        let b = CMatrix::from_fn(3, 3, |i, j| C64::new(if i == j { 2.0 } else { 0.1 }, 0.0));
        let ab = op(a.kronecker(&b), &[("A", 2), ("B", 3)]);
        let ta = ab.partial_trace(&["B"]).unwrap();
        assert!((ta.entries() - &a * b.trace()).norm() < 1e-12);
        let tb = ab.partial_trace(&["A"]).unwrap();
        assert!((tb.entries() - &b * a.trace()).norm() < 1e-12);
        assert!(ab.partial_trace(&["Z"]).is_err());
    }

    #[test]
    fn trace_replace_is_idempotent() {
        let x = op(counting(8), &[("A", 2), ("B", 2), ("C", 2)]);
        let r = x.trace_replace(&["B"]).unwrap();
        let rr = r.trace_replace(&["B"]).unwrap();
        assert!(r.max_abs_diff(&rr).unwrap() < 1e-12);
        assert!((r.trace() - x.trace()).norm() < 1e-12);
    }

    #[test]
    fn link_without_shared_is_kron() {
        let a = op(counting(2), &[("A", 2)]);
        let b = op(counting(3), &[("B", 3)]);
        let l = a.link(&b).unwrap();
        assert_eq!(l, a.kron(&b).unwrap());
    }

    #[test]
    fn link_rejects_dim_mismatch() {
        let a = op(counting(2), &[("X", 2)]);
        let b = op(counting(3), &[("X", 3)]);
        assert!(a.link(&b).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let x = op(counting(4), &[("I", 2), ("O", 2)]);
        let s = serde_json::to_string(&x).unwrap();
        let y: LabeledOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn conjugation_by_local_matches_kron() {
        let x = op(counting(6), &[("A", 2), ("B", 3)]);
        let u = CMatrix::from_fn(3, 3, |i, j| C64::new((i as f64) - 0.3 * j as f64, 0.2 * i as f64));
        let full = CMatrix::identity(2, 2).kronecker(&u);
        let expect = &full * x.entries() * full.adjoint();
        let got = x.conjugated_by(&[("B", &u)]).unwrap();
        assert!((got.entries() - expect).norm() < 1e-10);
    }
}
