use super::{Block, Blocks, Cone, Equality, SdpProblem, Subspace};
use crate::error::{Error, Result};
use crate::task::{InputState, Mode, ProtocolSpec, Strategy, Target};
use crate::tensor::{choi_power, index, CMatrix, LabeledOperator, Wire};
use crate::twirl::{CommutantBasis, TwirlMap};
use crate::validity::SpanningSet;
use crate::wires;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Spanning-set rows when the operator side is at most `SPANNING_MAX_DIM`, covariant otherwise.
    Auto,
    /// One defining-equation row per spanning unitary.
    Spanning,
    /// Covariant variables with the single U = 1 condition.
    Covariant,
}

impl FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Formulation::Auto),
            "spanning" | "span" => Ok(Formulation::Spanning),
            "covariant" | "cov" => Ok(Formulation::Covariant),
            _ => Err(Error::InvalidInput(format!("unknown formulation `{s}`"))),
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Auto => "auto",
            Formulation::Spanning => "spanning",
            Formulation::Covariant => "covariant",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Deterministic,
    Covariant,
    Spanning,
    Custom,
}

/// Dense spanning rows are used up to this supermap side (d = 2, k ≤ 3 and d = 3, k = 1).
pub const SPANNING_MAX_DIM: usize = 128;

pub fn resolve_formulation(d: usize, k: usize, f: Formulation) -> Formulation {
    match f {
        Formulation::Auto if d.pow(2 * k as u32 + 1) <= SPANNING_MAX_DIM => Formulation::Spanning,
        Formulation::Auto => Formulation::Covariant,
        other => other,
    }
}

/// X ↦ Tr_T(X) ⊗ 1_T/d_T on real matrices over a fixed layout.
#[derive(Clone, Debug)]
struct TraceReplace {
    kept: Vec<usize>,
    traced: Vec<usize>,
}

impl TraceReplace {
    fn new(dims: &[usize], set: &[usize]) -> Self {
        let rest: Vec<usize> = (0..dims.len()).filter(|p| !set.contains(p)).collect();
        TraceReplace { kept: index::sub_offsets(dims, &rest), traced: index::sub_offsets(dims, set) }
    }

    fn accumulate(&self, x: &DMatrix<f64>, out: &mut DMatrix<f64>, coef: f64) {
        let nk = self.kept.len();
        let mut red = DMatrix::<f64>::zeros(nk, nk);
        for &t in &self.traced {
            for j in 0..nk {
                let cj = self.kept[j] + t;
                for i in 0..nk {
                    red[(i, j)] += x[(self.kept[i] + t, cj)];
                }
            }
        }
        red *= coef / self.traced.len() as f64;
        for &t in &self.traced {
            for j in 0..nk {
                let cj = self.kept[j] + t;
                for i in 0..nk {
                    out[(self.kept[i] + t, cj)] += red[(i, j)];
                }
            }
        }
    }
}

/// Orthogonal projector onto operators obeying the affine-free part of a strategy class,
/// P = 1 − Σ Q with mutually orthogonal trace-and-replace terms Q. Layout I…, O…, F.
#[derive(Clone, Debug)]
pub struct ClassProjector {
    terms: Vec<(f64, TraceReplace)>,
}

impl ClassProjector {
    pub fn new(strategy: Strategy, d: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("need k ≥ 1".into()));
        }
        let dims = vec![d; 2 * k + 1];
        let (inp, out, f) = (|j: usize| j, |j: usize| k + j, 2 * k);
        // each Q = _base ∏(1 − _extra)
        let mut qs: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        match (strategy, k) {
            (Strategy::Parallel, _) | (Strategy::General, 1) => qs.push((vec![f], (0..k).map(out).collect())),
            (Strategy::Sequential, _) => {
                for j in 0..k {
                    let mut base = vec![f];
                    base.extend((j + 1..k).map(inp));
                    base.extend((j + 1..k).map(out));
                    qs.push((base, vec![out(j)]));
                }
            }
            (Strategy::General, 2) => {
                qs.push((vec![inp(0), out(0), f], vec![out(1)]));
                qs.push((vec![inp(1), out(1), f], vec![out(0)]));
            }
            (Strategy::General, _) => {
                return Err(Error::Unsupported("general strategies are only defined for k ≤ 2".into()))
            }
        }
        let mut expanded: Vec<(Vec<usize>, f64)> = Vec::new();
        let mut add = |set: Vec<usize>, coef: f64| {
            let mut set = set;
            set.sort_unstable();
            set.dedup();
            match expanded.iter_mut().find(|(s, _)| *s == set) {
                Some(e) => e.1 += coef,
                None => expanded.push((set, coef)),
            }
        };
        for (base, extra) in &qs {
            // single extra factor: _base − _{base ∪ extra}
            add(base.clone(), 1.0);
            add(base.iter().chain(extra).copied().collect(), -1.0);
        }
        if strategy == Strategy::General && k == 2 {
            // _F (1 − _{O1})(1 − _{O2})
            add(vec![f], 1.0);
            add(vec![f, out(0)], -1.0);
            add(vec![f, out(1)], -1.0);
            add(vec![f, out(0), out(1)], 1.0);
        }
        let terms = expanded
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(s, c)| (c, TraceReplace::new(&dims, &s)))
            .collect();
        Ok(ClassProjector { terms })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (c, t) in &self.terms {
            t.accumulate(x, &mut out, -c);
        }
        out
    }
}

pub fn class_projector(strategy: Strategy, d: usize, k: usize) -> Result<ClassProjector> {
    ClassProjector::new(strategy, d, k)
}

fn scaled(x: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    x * s
}

/// Deterministic: S covariant and in the class.
struct CovariantClass {
    class: ClassProjector,
    twirl: TwirlMap,
}

impl Subspace for CovariantClass {
    fn project(&self, x: &[DMatrix<f64>]) -> Blocks {
        vec![self.twirl.apply(&self.class.apply(&x[0]))]
    }
}

/// (S, T): both covariant, S + T in the class.
struct CovariantPair {
    class: ClassProjector,
    twirl: TwirlMap,
}

impl Subspace for CovariantPair {
    fn project(&self, x: &[DMatrix<f64>]) -> Blocks {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let u = scaled(&(&x[0] + &x[1]), r);
        let v = scaled(&(&x[0] - &x[1]), r);
        let u = self.twirl.apply(&self.class.apply(&u));
        let v = self.twirl.apply(&v);
        vec![scaled(&(&u + &v), r), scaled(&(&u - &v), r)]
    }
}

/// (S, T, p): S + T in the class.
struct ClassPair {
    class: ClassProjector,
}

impl Subspace for ClassPair {
    fn project(&self, x: &[DMatrix<f64>]) -> Blocks {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let u = self.class.apply(&scaled(&(&x[0] + &x[1]), r));
        let v = scaled(&(&x[0] - &x[1]), r);
        vec![scaled(&(&u + &v), r), scaled(&(&u - &v), r), x[2].clone()]
    }
}

fn layout_labels(layout: &[Wire]) -> Vec<&str> {
    layout.iter().map(|w| w.label.as_str()).collect()
}

/// Real matrix of `op` in the given layout; fails if the operator is genuinely complex.
fn real_in(op: &LabeledOperator, layout: &[Wire]) -> Result<DMatrix<f64>> {
    let p = op.permuted(&layout_labels(layout))?;
    let im = p.entries().iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if im > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "operator has imaginary part {im:.2e}; the programs use real variables, pose them for a real reference state"
        )));
    }
    Ok(p.real_part())
}

fn real_psi(spec: &ProtocolSpec) -> Result<DVector<f64>> {
    let psi = match &spec.state {
        InputState::Pure { psi } => psi,
        _ => return Err(Error::Unsupported("the programs are posed for pure single-system inputs".into())),
    };
    if psi.iter().any(|z| z.im.abs() > 1e-12) {
        return Err(Error::InvalidInput(
            "state has complex amplitudes; use a real reference state (the optimum does not depend on ψ)".into(),
        ));
    }
    Ok(psi.map(|z| z.re))
}

fn check_spec(spec: &ProtocolSpec, mode: Mode) -> Result<()> {
    spec.validate()?;
    if spec.mode != mode {
        return Err(Error::InvalidInput(format!("expected mode {mode:?}, got {:?}", spec.mode)));
    }
    if spec.f == Target::Sar {
        return Err(Error::Unsupported(
            "storage-and-retrieval is solved as transposition and converted; pose f = trans".into(),
        ));
    }
    if spec.strategy == Strategy::General && spec.k != 2 {
        return Err(Error::Unsupported("general strategies are only implemented for k = 2".into()));
    }
    Ok(())
}

fn twirl_map(spec: &ProtocolSpec, layout: &[Wire]) -> Result<TwirlMap> {
    CommutantBasis::new(&spec.f.covariance_rep(spec.d, spec.k))?.map_for(layout)
}

fn trace_row(dim: usize, n_blocks: usize, psd_blocks: usize, rhs: f64) -> Equality {
    let coeffs = (0..n_blocks)
        .map(|i| if i < psd_blocks { DMatrix::identity(dim, dim) } else { DMatrix::zeros(1, 1) })
        .collect();
    Equality { coeffs, rhs }
}

/// Orthonormal basis of the common kernel of |1⟩⟩⟨⟨1|^{⊗k} ⊗ (1 − ψψ) under the covariance
/// twirl. Any S with S*|U⟩⟩⟨⟨U|^{⊗k} ∝ f(U)ψψf(U)† for all U lives on this span.
pub fn face_basis(spec: &ProtocolSpec) -> Result<DMatrix<f64>> {
    let (d, k) = (spec.d, spec.k);
    let psi = real_psi(spec)?;
    let layout = spec.supermap_wires();
    let reject = DMatrix::<f64>::identity(d, d) - &psi * psi.transpose();
    let out = LabeledOperator::from_real(&reject, vec![Wire::new(wires::TARGET, d)])?;
    let m = choi_power(&CMatrix::identity(d, d), k)?.kron(&out)?;
    let m = twirl_map(spec, &layout)?.apply(&real_in(&m, &layout)?);
    let e = crate::tensor::robust_eigen(&((&m + m.transpose()) * 0.5));
    let top = e.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let keep: Vec<usize> = (0..m.nrows()).filter(|&i| e.eigenvalues[i] < 1e-9 * top.max(1e-300)).collect();
    Ok(DMatrix::from_fn(m.nrows(), keep.len(), |r, c| e.eigenvectors[(r, keep[c])]))
}

/// max p over superinstruments 0 ≤ S ≤ S_ch (T = S_ch − S ≥ 0) with
/// S*|U⟩⟩⟨⟨U|^{⊗k} = p f(U)|ψ⟩⟨ψ|f(U)†.
pub fn build_probabilistic(
    spec: &ProtocolSpec,
    spanning: Option<&SpanningSet>,
    formulation: Formulation,
) -> Result<SdpProblem> {
    check_spec(spec, Mode::Prob)?;
    let (d, k) = (spec.d, spec.k);
    let psi = real_psi(spec)?;
    let layout = spec.supermap_wires();
    let n = layout.iter().map(|w| w.dim).product::<usize>();
    let dk = (d as f64).powi(k as i32);
    let class = ClassProjector::new(spec.strategy, d, k)?;
    let face = face_basis(spec)?;
    let label = format!("{}-p-k{}-d{}-{}", spec.f.name(), k, d, spec.strategy.short());
    match resolve_formulation(d, k, formulation) {
        Formulation::Covariant | Formulation::Auto => {
            let accept = LabeledOperator::from_real(&(&psi * psi.transpose()), vec![Wire::new(wires::TARGET, d)])?;
            let obj = real_in(&choi_power(&CMatrix::identity(d, d), k)?.kron(&accept)?, &layout)?;
            let blocks = vec![Block::new("S", n, Cone::Face(face)), Block::new("T", n, Cone::Psd)];
            let sub = CovariantPair { class, twirl: twirl_map(spec, &layout)? };
            SdpProblem::new(
                format!("{label}-cov"),
                blocks,
                vec![obj, DMatrix::zeros(n, n)],
                Arc::new(sub),
                vec![trace_row(n, 2, 2, dk)],
                super::ProblemKind::Covariant,
                Some(spec.clone()),
            )
        }
        Formulation::Spanning => {
            let ss = spanning.ok_or_else(|| Error::InvalidInput("spanning formulation needs a spanning set".into()))?;
            if ss.d != d || ss.k != k {
                return Err(Error::InvalidInput(format!(
                    "spanning set is for d={} k={}, problem has d={d} k={k}",
                    ss.d, ss.k
                )));
            }
            let mut rows = vec![trace_row(n, 3, 2, dk)];
            let psi_c = psi.map(|x| nalgebra::Complex::new(x, 0.0));
            for u in &ss.unitaries {
                // ⟨t| S*|U⟩⟩⟨⟨U|^{⊗k} |t⟩ = Tr[S (conj|U⟩⟩⟨⟨U|^{⊗k} ⊗ |t⟩⟨t|)], t = f(U)ψ
                let t = spec.f.apply(u) * &psi_c;
                let m = choi_power(&u.map(|z| z.conj()), k)?
                    .kron(&LabeledOperator::projector(&t, vec![Wire::new(wires::TARGET, d)])?)?;
                let m = m.permuted(&layout_labels(&layout))?.real_part();
                let m = (&m + m.transpose()) * 0.5;
                rows.push(Equality {
                    coeffs: vec![m, DMatrix::zeros(n, n), DMatrix::from_element(1, 1, -1.0)],
                    rhs: 0.0,
                });
            }
            let blocks = vec![
                Block::new("S", n, Cone::Face(face)),
                Block::new("T", n, Cone::Psd),
                Block::new("p", 1, Cone::Free),
            ];
            let obj = vec![DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::from_element(1, 1, 1.0)];
            SdpProblem::new(
                format!("{label}-span"),
                blocks,
                obj,
                Arc::new(ClassPair { class }),
                rows,
                super::ProblemKind::Spanning,
                Some(spec.clone()),
            )
        }
    }
}

/// max Tr(SΩ) over covariant superchannels S of the strategy class.
pub fn build_deterministic(spec: &ProtocolSpec, omega: &LabeledOperator) -> Result<SdpProblem> {
    check_spec(spec, Mode::Det)?;
    real_psi(spec)?;
    let (d, k) = (spec.d, spec.k);
    let layout = spec.supermap_wires();
    let n = layout.iter().map(|w| w.dim).product::<usize>();
    let obj = real_in(omega, &layout)?;
    let sub = CovariantClass { class: ClassProjector::new(spec.strategy, d, k)?, twirl: twirl_map(spec, &layout)? };
    SdpProblem::new(
        format!("{}-F-k{}-d{}-{}", spec.f.name(), k, d, spec.strategy.short()),
        vec![Block::new("S", n, Cone::Psd)],
        vec![obj],
        Arc::new(sub),
        vec![trace_row(n, 1, 1, (d as f64).powi(k as i32))],
        super::ProblemKind::Deterministic,
        Some(spec.clone()),
    )
}

/// The same task posed for |0⟩; the optimal values do not depend on the pure input state.
pub fn reference_spec(spec: &ProtocolSpec) -> Result<ProtocolSpec> {
    match spec.state {
        InputState::Pure { .. } => spec.with_state(InputState::basis(spec.d, 0)),
        _ => Err(Error::Unsupported("the programs are posed for pure single-system inputs".into())),
    }
}

impl SdpProblem {
    fn spec(&self) -> Result<&ProtocolSpec> {
        self.metadata.as_ref().ok_or_else(|| Error::InvalidInput(format!("problem `{}` has no protocol", self.label)))
    }

    /// Variables representing a known supermap S (with superchannel `total` ≥ S and value p).
    pub fn point_from(&self, s: &LabeledOperator, total: Option<&LabeledOperator>, p: f64) -> Result<Blocks> {
        let spec = self.spec()?;
        let layout = spec.supermap_wires();
        let sm = real_in(s, &layout)?;
        let rest = |sm: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            let t = total.ok_or_else(|| Error::InvalidInput("a probabilistic point needs its superchannel".into()))?;
            Ok(real_in(t, &layout)? - sm)
        };
        Ok(match self.kind {
            super::ProblemKind::Deterministic => vec![sm],
            super::ProblemKind::Covariant => {
                let t = twirl_map(spec, &layout)?.apply(&rest(&sm)?);
                vec![sm, t]
            }
            super::ProblemKind::Spanning => {
                let t = rest(&sm)?;
                vec![sm, t, DMatrix::from_element(1, 1, p)]
            }
            super::ProblemKind::Custom => {
                return Err(Error::Unsupported("custom problems have no supermap embedding".into()))
            }
        })
    }

    /// The S block as an operator on the supermap wires.
    pub fn supermap(&self, blocks: &[DMatrix<f64>]) -> Result<LabeledOperator> {
        let spec = self.spec()?;
        LabeledOperator::from_real(&blocks[0], spec.supermap_wires())
    }
}
