//! Group averaging over U(d) via the commutant of a tensor representation.
//!
//! For a representation built from U and Ū factors the commutant is spanned by the
//! wire permutations partially transposed on the Ū wires, so the Haar twirl is an
//! orthogonal projection onto that span and can be computed exactly.

use std::collections::HashSet;

use nalgebra::{ComplexField, DMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{InputState, ProtocolSpec, Target};
use crate::tensor::{
    c, choi_identity, choi_power, haar_unitary, index, CMatrix, CVector, LabeledOperator, Wire,
};
use crate::wires;

/// How a single wire transforms under U.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    U,
    UBar,
    UT,
    UDag,
    Identity,
}

impl Action {
    pub fn apply(self, u: &CMatrix) -> CMatrix {
        match self {
            Action::U => u.clone(),
            Action::UBar => u.conjugate(),
            Action::UT => u.transpose(),
            Action::UDag => u.adjoint(),
            Action::Identity => CMatrix::identity(u.nrows(), u.ncols()),
        }
    }
}

/// A tensor-product representation U ↦ ⊗_w a_w(U) on named wires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepSpec {
    pub d: usize,
    pub factors: Vec<(String, Action)>,
}

impl RepSpec {
    pub fn new(d: usize, factors: Vec<(String, Action)>) -> Self {
        RepSpec { d, factors }
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|(l, _)| l.as_str()).collect()
    }

    /// The per-wire matrices of rep(U).
    pub fn matrices(&self, u: &CMatrix) -> Vec<(String, CMatrix)> {
        self.factors
            .iter()
            .filter(|(_, a)| *a != Action::Identity)
            .map(|(l, a)| (l.clone(), a.apply(u)))
            .collect()
    }

    /// rep(U) X rep(U)†.
    pub fn act(&self, x: &LabeledOperator, u: &CMatrix) -> Result<LabeledOperator> {
        let mats = self.matrices(u);
        let ops: Vec<(&str, &CMatrix)> = mats.iter().map(|(l, m)| (l.as_str(), m)).collect();
        x.conjugated_by(&ops)
    }

    /// ‖rep(U) X rep(U)† − X‖_max, zero iff X commutes with rep(U).
    pub fn commutator_defect(&self, x: &LabeledOperator, u: &CMatrix) -> Result<f64> {
        self.act(x, u)?.max_abs_diff(x)
    }

    /// Wires that actually transform and whether each carries the conjugate action,
    /// after folding Uᵀ/U† onto Ū/U through U ↦ U†.
    fn normalized(&self) -> Result<Vec<(String, bool)>> {
        let active: Vec<&(String, Action)> =
            self.factors.iter().filter(|(_, a)| *a != Action::Identity).collect();
        let plain = active.iter().any(|(_, a)| matches!(a, Action::U | Action::UBar));
        let inverted = active.iter().any(|(_, a)| matches!(a, Action::UT | Action::UDag));
        if plain && inverted {
            return Err(Error::Unsupported(
                "representations mixing U/Ū with Uᵀ/U† factors have no permutation commutant".into(),
            ));
        }
        Ok(active
            .into_iter()
            .map(|(l, a)| (l.clone(), matches!(a, Action::UBar | Action::UT)))
            .collect())
    }
}

/// A linearly independent spanning set of the commutant, each element a 0/1 matrix
/// stored by its nonzero positions on the active wires.
#[derive(Clone, Debug)]
pub struct CommutantBasis {
    pub d: usize,
    pub labels: Vec<String>,
    support: Vec<Vec<(usize, usize)>>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

const INDEPENDENCE_TOL: f64 = 1e-8;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Nonzero (row, col) positions of the wire permutation π, partially transposed on `conj`.
fn permutation_support(d: usize, pi: &[usize], conj: &[bool]) -> Vec<(usize, usize)> {
    let n = pi.len();
    let dim = d.pow(n as u32);
    let mut out = Vec::with_capacity(dim);
    let mut col = vec![0usize; n];
    for flat in 0..dim {
        let mut rem = flat;
        for p in (0..n).rev() {
            col[p] = rem % d;
            rem /= d;
        }
        // P_π |c_0 … c_{n-1}⟩ = |c_{π(0)} … c_{π(n-1)}⟩
        let row: Vec<usize> = pi.iter().map(|&j| col[j]).collect();
        let (mut r, mut s) = (0usize, 0usize);
        for p in 0..n {
            let (a, b) = if conj[p] { (col[p], row[p]) } else { (row[p], col[p]) };
            r = r * d + a;
            s = s * d + b;
        }
        out.push((r, s));
    }
    out
}

impl CommutantBasis {
    pub fn new(rep: &RepSpec) -> Result<Self> {
        let norm = rep.normalized()?;
        let n = norm.len();
        let conj: Vec<bool> = norm.iter().map(|(_, b)| *b).collect();
        let candidates: Vec<Vec<(usize, usize)>> = permutations(n)
            .iter()
            .map(|pi| permutation_support(rep.d, pi, &conj))
            .collect();
        let sets: Vec<HashSet<(usize, usize)>> =
            candidates.iter().map(|s| s.iter().copied().collect()).collect();
        let full_gram = DMatrix::from_fn(sets.len(), sets.len(), |i, j| {
            sets[i].intersection(&sets[j]).count() as f64
        });

        // Greedy Cholesky: keep a candidate if it is not in the span of those kept.
        let mut kept: Vec<usize> = Vec::new();
        let mut l_rows: Vec<Vec<f64>> = Vec::new();
        for j in 0..sets.len() {
            let mut y = Vec::with_capacity(kept.len());
            for (a, &i) in kept.iter().enumerate() {
                let s: f64 = (0..a).map(|b| l_rows[a][b] * y[b]).sum();
                y.push((full_gram[(i, j)] - s) / l_rows[a][a]);
            }
            let resid = full_gram[(j, j)] - y.iter().map(|v| v * v).sum::<f64>();
            if resid > INDEPENDENCE_TOL * full_gram[(j, j)] {
                y.push(resid.sqrt());
                l_rows.push(y);
                kept.push(j);
            }
        }
        let gram = DMatrix::from_fn(kept.len(), kept.len(), |a, b| full_gram[(kept[a], kept[b])]);
        let gram_inv = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("commutant Gram matrix is singular".into()))?
            .inverse();
        Ok(CommutantBasis {
            d: rep.d,
            labels: norm.into_iter().map(|(l, _)| l).collect(),
            support: kept.into_iter().map(|j| candidates[j].clone()).collect(),
            gram,
            gram_inv,
        })
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// The basis elements as operators on the active wires.
    pub fn elements(&self) -> Vec<LabeledOperator> {
        let n = self.labels.len();
        let dim = self.d.pow(n as u32);
        let ws: Vec<Wire> = self.labels.iter().map(|l| Wire::new(l.clone(), self.d)).collect();
        self.support
            .iter()
            .map(|s| {
                let mut m = CMatrix::zeros(dim, dim);
                for &(r, col) in s {
                    m[(r, col)] = c(1.0);
                }
                LabeledOperator::new(m, ws.clone()).expect("commutant element dims")
            })
            .collect()
    }

    /// Twirl on operators with a fixed wire layout.
    pub fn map_for(&self, layout: &[Wire]) -> Result<TwirlMap> {
        let dims: Vec<usize> = layout.iter().map(|w| w.dim).collect();
        let mut active = Vec::with_capacity(self.labels.len());
        for l in &self.labels {
            let p = layout
                .iter()
                .position(|w| &w.label == l)
                .ok_or_else(|| Error::UnknownLabel(l.clone()))?;
            if layout[p].dim != self.d {
                return Err(Error::Dimension(format!(
                    "wire `{l}` has dim {}, representation acts on dim {}",
                    layout[p].dim, self.d
                )));
            }
            active.push(p);
        }
        let inert: Vec<usize> = (0..layout.len()).filter(|p| !active.contains(p)).collect();
        Ok(TwirlMap {
            basis: self.clone(),
            active_off: index::sub_offsets(&dims, &active),
            inert_off: index::sub_offsets(&dims, &inert),
            layout: layout.to_vec(),
        })
    }
}

/// The twirl specialised to one wire layout, applicable to raw matrices.
#[derive(Clone, Debug)]
pub struct TwirlMap {
    basis: CommutantBasis,
    active_off: Vec<usize>,
    inert_off: Vec<usize>,
    layout: Vec<Wire>,
}

impl TwirlMap {
    pub fn layout(&self) -> &[Wire] {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.active_off.len() * self.inert_off.len()
    }

    /// Works for real symmetric and complex Hermitian (or arbitrary) matrices alike.
    pub fn apply<T: ComplexField<RealField = f64> + Copy>(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let ni = self.inert_off.len();
        let nb = self.basis.len();
        let ys: Vec<DMatrix<T>> = self
            .basis
            .support
            .iter()
            .map(|s| {
                let mut y = DMatrix::<T>::zeros(ni, ni);
                for &(r, col) in s {
                    let (ro, co) = (self.active_off[r], self.active_off[col]);
                    for (a, &na) in self.inert_off.iter().enumerate() {
                        for (b, &nb2) in self.inert_off.iter().enumerate() {
                            y[(a, b)] += x[(ro + na, co + nb2)];
                        }
                    }
                }
                y
            })
            .collect();
        let mut out = DMatrix::<T>::zeros(x.nrows(), x.ncols());
        for i in 0..nb {
            let mut ci = DMatrix::<T>::zeros(ni, ni);
            for (j, y) in ys.iter().enumerate() {
                let g = self.basis.gram_inv[(i, j)];
                if g != 0.0 {
                    ci += y * T::from_real(g);
                }
            }
            for &(r, col) in &self.basis.support[i] {
                let (ro, co) = (self.active_off[r], self.active_off[col]);
                for (a, &na) in self.inert_off.iter().enumerate() {
                    for (b, &nb2) in self.inert_off.iter().enumerate() {
                        out[(ro + na, co + nb2)] += ci[(a, b)];
                    }
                }
            }
        }
        out
    }
}

/// Exact Haar twirl ∫ rep(U) X rep(U)† dU.
pub fn twirl(x: &LabeledOperator, rep: &RepSpec) -> Result<LabeledOperator> {
    let map = CommutantBasis::new(rep)?.map_for(x.wires())?;
    LabeledOperator::new(map.apply(x.entries()), x.wires().to_vec())
}

/// Sample average of rep(U) X rep(U)† over `samples` Haar unitaries.
pub fn twirl_monte_carlo<R: Rng + ?Sized>(
    x: &LabeledOperator,
    rep: &RepSpec,
    samples: usize,
    rng: &mut R,
) -> Result<LabeledOperator> {
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let mut acc = LabeledOperator::zeros(x.wires().to_vec())?;
    for _ in 0..samples {
        let u = haar_unitary(rep.d, rng)?;
        acc = acc.add(&rep.act(x, &u)?)?;
    }
    Ok(acc.scale_re(1.0 / samples as f64))
}

/// A Haar-random unitary B with B|ψ⟩ ∝ |ψ⟩: W(e^{iφ} ⊕ Haar(d−1))W† with W|0⟩ = ψ.
pub fn stabilizer_unitary<R: Rng + ?Sized>(psi: &CVector, rng: &mut R) -> Result<CMatrix> {
    let d = psi.len();
    let w = crate::task::completing_unitary(psi);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut block = CMatrix::zeros(d, d);
    block[(0, 0)] = crate::tensor::C64::from_polar(1.0, phi);
    if d > 1 {
        let h = haar_unitary(d - 1, rng)?;
        block.view_mut((1, 1), (d - 1, d - 1)).copy_from(&h);
    }
    Ok(&w * block * w.adjoint())
}

/// A unitary V with f(V)|ψ⟩ ∝ |ψ⟩, to be fed to `Target::stabilizer_rep`.
pub fn stabilizer_sample<R: Rng + ?Sized>(f: Target, psi: &CVector, rng: &mut R) -> Result<CMatrix> {
    Ok(f.preimage(&stabilizer_unitary(psi, rng)?))
}

/// Ω with Tr(S Ω) = average fidelity for a deterministic S and Tr(S Ω) = p for a
/// probabilistic one: the twirl of |1⟩⟩⟨⟨1|^{⊗k} ⊗ ρ_F (⊗ reference) under U_f.
pub fn performance_operator(spec: &ProtocolSpec) -> Result<LabeledOperator> {
    spec.validate()?;
    let (d, k) = (spec.d, spec.k);
    let rep = spec.f.covariance_rep(d, k);
    let choi = choi_power(&CMatrix::identity(d, d), k)?;
    let psi = spec.state.psi();
    let out = match &spec.state {
        InputState::Pure { .. } | InputState::Bipartite { .. } => {
            LabeledOperator::projector(psi, spec.output_wires())?
        }
        InputState::Mixed { eta, .. } => {
            let p = psi * psi.adjoint() * c(*eta) + CMatrix::identity(d, d) * c((1.0 - eta) / d as f64);
            LabeledOperator::new(p, spec.output_wires())?
        }
    };
    let x = choi.kron(&out)?.canonical()?;
    twirl(&x, &rep)
}

/// Ω for a bipartite input built by linking |ψ⟩⟨ψ|_{PA} into the twirl of
/// |1⟩⟩⟨⟨1|^{⊗k} ⊗ |1⟩⟩⟨⟨1|_{PF}; agrees with `performance_operator`.
pub fn performance_operator_bipartite(spec: &ProtocolSpec) -> Result<LabeledOperator> {
    spec.validate()?;
    let (d, k) = (spec.d, spec.k);
    const PORT: &str = "P";
    let rep = spec.f.covariance_rep(d, k);
    let x = choi_power(&CMatrix::identity(d, d), k)?.kron(&choi_identity(d, PORT, wires::TARGET)?)?;
    let omega_p = twirl(&x, &rep)?;
    let dim_a = spec.state.dim_a();
    let mut ws = vec![Wire::new(PORT, d)];
    if matches!(spec.state, InputState::Bipartite { .. }) {
        ws.push(Wire::new(wires::REFERENCE, dim_a));
    }
    let rho = match &spec.state {
        InputState::Mixed { .. } => {
            return Err(Error::InvalidInput("bipartite performance operator needs a pure or bipartite state".into()))
        }
        _ => LabeledOperator::projector(spec.state.psi(), ws)?,
    };
    rho.link(&omega_p)?.canonical()
}
