//! Closed-form optimal supermaps for transposition, conjugation, inversion and
//! storage-and-retrieval with a known input state.
//!
//! Constructions are written for ψ = |0⟩ where convenient and moved to a general ψ by
//! rotating a slot wire: the slot input for homomorphic f, the slot output otherwise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{completing_unitary, InputState, Mode, ProtocolSpec, Strategy, Target};
use crate::tensor::{
    antisym_proj, c, choi_identity, choi_power, max_entangled_projector, sym_proj, CMatrix, CVector,
    LabeledOperator, Wire, C64,
};
use crate::twirl::{twirl, Action, RepSpec};
use crate::wires::{self, MEMORY, REFERENCE, TARGET};

pub const SCHEMA: u32 = 1;

/// S = E * D: a state E on slot inputs and memory, and a decoder instrument on
/// slot outputs and memory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Implementation {
    pub encoder: LabeledOperator,
    pub decoder: LabeledOperator,
    /// Discarded branch of the decoder instrument, for probabilistic protocols.
    pub decoder_failure: Option<LabeledOperator>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub schema: u32,
    pub spec: ProtocolSpec,
    /// Success probability (probabilistic) or average fidelity (deterministic).
    pub value: f64,
    /// The success branch S, or the superchannel itself when deterministic.
    pub supermap: LabeledOperator,
    /// The superchannel S_ch ≥ S the success branch belongs to.
    pub total: Option<LabeledOperator>,
    pub implementation: Option<Implementation>,
    /// Single-Kraus filter √σ/√‖σ‖ for bipartite transposition.
    pub filter: Option<LabeledOperator>,
}

impl ProtocolResult {
    fn new(spec: ProtocolSpec, value: f64, supermap: LabeledOperator, total: Option<LabeledOperator>) -> Result<Self> {
        Ok(ProtocolResult {
            schema: SCHEMA,
            spec,
            value,
            supermap: supermap.canonical()?,
            total: total.map(|t| t.canonical()).transpose()?,
            implementation: None,
            filter: None,
        })
    }

    /// The superchannel to run class checks on.
    pub fn channel(&self) -> &LabeledOperator {
        self.total.as_ref().unwrap_or(&self.supermap)
    }

    /// S * |U⟩⟩⟨⟨U|^{⊗k}.
    pub fn apply(&self, u: &CMatrix) -> Result<LabeledOperator> {
        apply_supermap(&self.supermap, u, self.spec.k)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: ProtocolResult = serde_json::from_str(s)?;
        if r.schema != SCHEMA {
            return Err(Error::InvalidInput(format!("unsupported schema {}", r.schema)));
        }
        r.spec.validate()?;
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// S * |U⟩⟩⟨⟨U|^{⊗k}, with output wires in canonical order.
pub fn apply_supermap(s: &LabeledOperator, u: &CMatrix, k: usize) -> Result<LabeledOperator> {
    s.link(&choi_power(u, k)?)?.canonical()
}

fn single(m: CMatrix, label: &str) -> Result<LabeledOperator> {
    let d = m.nrows();
    LabeledOperator::new(m, vec![Wire::new(label, d)])
}

fn ident(label: &str, d: usize) -> LabeledOperator {
    LabeledOperator::identity(vec![Wire::new(label, d)]).expect("positive dimension")
}

fn proj(v: &CVector, label: &str) -> Result<LabeledOperator> {
    single(v * v.adjoint(), label)
}

fn basis(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = c(1.0);
    v
}

fn kron_all(ops: &[LabeledOperator]) -> Result<LabeledOperator> {
    let mut acc = LabeledOperator::scalar(c(1.0));
    for o in ops {
        acc = acc.kron(o)?;
    }
    Ok(acc)
}

fn pauli_y() -> CMatrix {
    let z = C64::new(0.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[z, C64::new(0.0, -1.0), C64::new(0.0, 1.0), z])
}

/// Choi of the optimal CP approximation of ρ ↦ (d·Tr ρ·1 − ρ)/(d²−1).
pub fn universal_not(d: usize, input: &str, output: &str) -> Result<LabeledOperator> {
    let ws = vec![Wire::new(input, d), Wire::new(output, d)];
    let id = LabeledOperator::identity(ws)?;
    let n = (d * d) as f64 - 1.0;
    id.scale_re(d as f64 / n).sub(&choi_identity(d, input, output)?.scale_re(1.0 / n))
}

/// 1_I/d^k ⊗ 1_O ⊗ 1_F/d (⊗ 1_A/d_A): outputs white noise whatever the slots do.
pub fn noise_supermap(d: usize, k: usize, dim_a: Option<usize>) -> Result<LabeledOperator> {
    let mut ops = Vec::new();
    for l in wires::inputs(k) {
        ops.push(ident(&l, d).scale_re(1.0 / d as f64));
    }
    for l in wires::outputs(k) {
        ops.push(ident(&l, d));
    }
    ops.push(ident(TARGET, d).scale_re(1.0 / d as f64));
    if let Some(da) = dim_a {
        ops.push(ident(REFERENCE, da).scale_re(1.0 / da as f64));
    }
    kron_all(&ops)?.canonical()
}

/// Moves a ψ = |0⟩ construction to ψ.
pub fn rotate_to_state(x: &LabeledOperator, f: Target, psi: &CVector, k: usize) -> Result<LabeledOperator> {
    let w = completing_unitary(psi);
    let v = f.preimage(&w);
    let (labels, a) = if f.is_homomorphism() {
        (wires::inputs(k), v)
    } else {
        (wires::outputs(k), v.transpose())
    };
    let ops: Vec<(&str, &CMatrix)> = labels
        .iter()
        .filter(|l| x.has_label(l))
        .map(|l| (l.as_str(), &a))
        .collect();
    x.conjugated_by(&ops)
}

/// Closed-form single-call success probability.
pub fn prob_value(f: Target, d: usize) -> f64 {
    match f {
        Target::Trans | Target::Sar => 1.0 / d as f64,
        Target::Conj => {
            if d == 2 {
                1.0
            } else {
                0.0
            }
        }
        Target::Inv => {
            if d == 2 {
                0.5
            } else {
                0.0
            }
        }
    }
}

/// Closed-form single-call average fidelity.
pub fn det_value(f: Target, d: usize) -> f64 {
    let df = d as f64;
    match f {
        Target::Trans | Target::Sar => (2.0 * df + 1.0) / (df * df + df),
        Target::Conj => {
            if d == 2 {
                1.0
            } else {
                2.0 / (df + 1.0)
            }
        }
        Target::Inv => (df + 3.0) / (df * (df + 1.0)),
    }
}

/// Largest visibility η* = (d⟨F⟩−1)/(d−1) for which ρ = η|ψ⟩⟨ψ| + (1−η)1/d admits a
/// deterministic exact protocol.
pub fn visibility_threshold(f: Target, d: usize) -> f64 {
    let df = d as f64;
    (df * det_value(f, d) - 1.0) / (df - 1.0)
}

fn pure_spec(f: Target, mode: Mode, d: usize, psi: &CVector) -> Result<ProtocolSpec> {
    ProtocolSpec::new(f, mode, d, 1, Strategy::Parallel, InputState::Pure { psi: psi.clone() })
}

fn transposition(spec: ProtocolSpec) -> Result<ProtocolResult> {
    let d = spec.d;
    let psi = spec.state.psi().clone();
    let det = spec.mode == Mode::Det;
    let p = proj(&psi, "O")?;
    let q = ident("O", d).sub(&p)?;
    let c1 = choi_identity(d, MEMORY, TARGET)?;
    let encoder = max_entangled_projector(d, "I", MEMORY)?;
    let keep = p.kron(&c1)?;
    let (decoder, failure) = if det {
        (keep.add(&q.kron(&universal_not(d, MEMORY, TARGET)?)?)?, None)
    } else {
        (keep, Some(q.kron(&c1)?))
    };
    let s = encoder.link(&decoder)?;
    let total = match &failure {
        Some(fd) => Some(s.add(&encoder.link(fd)?)?),
        None => None,
    };
    let value = if det { det_value(Target::Trans, d) } else { prob_value(Target::Trans, d) };
    let mut r = ProtocolResult::new(spec, value, s, total)?;
    r.implementation = Some(Implementation { encoder, decoder, decoder_failure: failure });
    Ok(r)
}

pub fn optimal_prob_transposition(d: usize, psi: &CVector) -> Result<ProtocolResult> {
    transposition(pure_spec(Target::Trans, Mode::Prob, d, psi)?)
}

pub fn optimal_det_transposition(d: usize, psi: &CVector) -> Result<ProtocolResult> {
    transposition(pure_spec(Target::Trans, Mode::Det, d, psi)?)
}

/// Qubit conjugation is exact: feed Y|ψ̄⟩ (up to phase) and apply Y after the slot.
fn qubit_conjugation_reference() -> Result<LabeledOperator> {
    let y = pauli_y();
    let yc = crate::tensor::choi_vector(&y, "O", TARGET).projector();
    proj(&basis(2, 1), "I")?.kron(&yc)
}

pub fn optimal_prob_conjugation(d: usize, psi: &CVector) -> Result<ProtocolResult> {
    let spec = pure_spec(Target::Conj, Mode::Prob, d, psi)?;
    if d == 2 {
        let s = rotate_to_state(&qubit_conjugation_reference()?, Target::Conj, psi, 1)?;
        ProtocolResult::new(spec, 1.0, s.clone(), Some(s))
    } else {
        let zero = LabeledOperator::zeros(spec.supermap_wires())?;
        ProtocolResult::new(spec, 0.0, zero, Some(noise_supermap(d, 1, None)?))
    }
}

pub fn optimal_det_conjugation(d: usize, psi: &CVector) -> Result<ProtocolResult> {
    let spec = pure_spec(Target::Conj, Mode::Det, d, psi)?;
    let reference = if d == 2 {
        qubit_conjugation_reference()?
    } else {
        proj(&basis(d, 0), "I")?.kron(&sym_proj(d, "O", TARGET)?.scale_re(2.0 / (d as f64 + 1.0)))?
    };
    let s = rotate_to_state(&reference, Target::Conj, psi, 1)?;
    ProtocolResult::new(spec, det_value(Target::Conj, d), s, None)
}

pub fn optimal_prob_inversion(d: usize, psi: &CVector) -> Result<ProtocolResult> {
    let spec = pure_spec(Target::Inv, Mode::Prob, d, psi)?;
    if d == 2 {
        let pa = antisym_proj(2, "I", TARGET)?;
        let s0 = proj(&basis(2, 1), "O")?.kron(&pa)?;
        let t0 = ident("O", 2).kron(&pa)?;
        let s = rotate_to_state(&s0, Target::Inv, psi, 1)?;
        let t = rotate_to_state(&t0, Target::Inv, psi, 1)?;
        ProtocolResult::new(spec, 0.5, s, Some(t))
    } else {
        let zero = LabeledOperator::zeros(spec.supermap_wires())?;
        ProtocolResult::new(spec, 0.0, zero, Some(noise_supermap(d, 1, None)?))
    }
}

pub fn optimal_det_inversion(d: usize, psi: &CVector) -> Result<ProtocolResult> {
    let spec = pure_spec(Target::Inv, Mode::Det, d, psi)?;
    let df = d as f64;
    let p0 = proj(&basis(d, 0), "O")?;
    let q0 = ident("O", d).sub(&p0)?;
    let s0 = p0
        .kron(&sym_proj(d, "I", TARGET)?)?
        .scale_re(2.0 / (df * (df + 1.0)))
        .add(&q0.kron(&antisym_proj(d, "I", TARGET)?)?.scale_re(2.0 / (df * (df - 1.0))))?;
    let s = rotate_to_state(&s0, Target::Inv, psi, 1)?;
    ProtocolResult::new(spec, det_value(Target::Inv, d), s, None)
}

/// Reduced state σ = Tr_A|ψ⟩⟨ψ| of a vector ordered system ⊗ reference.
pub fn reduced_state(psi: &CVector, d: usize, dim_a: usize) -> CMatrix {
    let m = CMatrix::from_fn(d, dim_a, |i, a| psi[i * dim_a + a]);
    &m * m.adjoint()
}

/// Largest eigenvalue of Tr_A|ψ⟩⟨ψ|.
pub fn reduced_norm(psi: &CVector, d: usize, dim_a: usize) -> f64 {
    crate::tensor::hermitian_eigenvalues(&reduced_state(psi, d, dim_a))
        .into_iter()
        .fold(0.0, f64::max)
}

fn bipartite_parts(spec: &ProtocolSpec) -> Result<(CVector, usize)> {
    match &spec.state {
        InputState::Bipartite { psi, dim_a } => Ok((psi.clone(), *dim_a)),
        _ => Err(Error::InvalidInput("expected a bipartite input state".into())),
    }
}

fn bipartite_spec(f: Target, d: usize, psi: &CVector, dim_a: usize) -> Result<ProtocolSpec> {
    ProtocolSpec::new(
        f,
        Mode::Prob,
        d,
        1,
        Strategy::Parallel,
        InputState::Bipartite { psi: psi.clone(), dim_a },
    )
}

fn check_dims(psi: &CVector, d: usize, dim_a: usize) -> Result<()> {
    if dim_a == 0 || psi.len() != d * dim_a {
        return Err(Error::Dimension(format!(
            "bipartite vector has length {}, expected {d}·{dim_a}",
            psi.len()
        )));
    }
    Ok(())
}

/// Prepares ψ on (slot output, reference) after the quantum filter; p = 1/(d‖σ‖).
pub fn bipartite_transposition(d: usize, psi: &CVector, dim_a: usize) -> Result<ProtocolResult> {
    check_dims(psi, d, dim_a)?;
    let spec = bipartite_spec(Target::Trans, d, psi, dim_a)?;
    let sigma = reduced_state(psi, d, dim_a);
    let norm = reduced_norm(psi, d, dim_a);
    let oa = vec![Wire::new("O", d), Wire::new(REFERENCE, dim_a)];
    let keep = LabeledOperator::projector(psi, oa)?.scale_re(1.0 / norm);
    let rest = single(CMatrix::identity(d, d) - &sigma / c(norm), "O")?
        .kron(&ident(REFERENCE, dim_a).scale_re(1.0 / dim_a as f64))?;
    let encoder = max_entangled_projector(d, "I", MEMORY)?;
    let c1 = choi_identity(d, MEMORY, TARGET)?;
    let decoder = keep.kron(&c1)?;
    let failure = rest.kron(&c1)?;
    let s = encoder.link(&decoder)?;
    let total = s.add(&encoder.link(&failure)?)?;
    let mut r = ProtocolResult::new(spec, 1.0 / (d as f64 * norm), s, Some(total))?;

    let eig = crate::tensor::robust_eigen(&sigma);
    let sqrt_vals = CMatrix::from_diagonal(&eig.eigenvalues.map(|v| c((v.max(0.0) / norm).sqrt())));
    let filter = &eig.eigenvectors * sqrt_vals * eig.eigenvectors.adjoint();
    r.filter = Some(single(filter, TARGET)?);
    r.implementation = Some(Implementation { encoder, decoder, decoder_failure: Some(failure) });
    Ok(r)
}

fn failed_bipartite(spec: ProtocolSpec, d: usize, dim_a: usize) -> Result<ProtocolResult> {
    let zero = LabeledOperator::zeros(spec.supermap_wires())?;
    ProtocolResult::new(spec, 0.0, zero, Some(noise_supermap(d, 1, Some(dim_a))?))
}

/// Qubits: U† = Y Uᵀ Y up to phase, so transpose (Y⊗1)ψ and rotate the output by Y.
pub fn bipartite_inversion(d: usize, psi: &CVector, dim_a: usize) -> Result<ProtocolResult> {
    check_dims(psi, d, dim_a)?;
    let spec = bipartite_spec(Target::Inv, d, psi, dim_a)?;
    if d != 2 {
        return failed_bipartite(spec, d, dim_a);
    }
    let y = pauli_y();
    let shifted = y.kronecker(&CMatrix::identity(dim_a, dim_a)) * psi;
    let base = bipartite_transposition(d, &shifted, dim_a)?;
    let rot = |x: &LabeledOperator| x.conjugated_by(&[(TARGET, &y)]);
    let s = rot(&base.supermap)?;
    let total = base.total.as_ref().map(rot).transpose()?;
    let mut r = ProtocolResult::new(spec, base.value, s, total)?;
    r.implementation = match base.implementation {
        Some(im) => Some(Implementation {
            encoder: im.encoder,
            decoder: rot(&im.decoder)?,
            decoder_failure: im.decoder_failure.as_ref().map(rot).transpose()?,
        }),
        None => None,
    };
    Ok(r)
}

/// Qubits: feed (Y⊗1)ψ into the slot and apply Y afterwards; exact.
pub fn bipartite_conjugation(d: usize, psi: &CVector, dim_a: usize) -> Result<ProtocolResult> {
    check_dims(psi, d, dim_a)?;
    let spec = bipartite_spec(Target::Conj, d, psi, dim_a)?;
    if d != 2 {
        return failed_bipartite(spec, d, dim_a);
    }
    let y = pauli_y();
    let fed = y.kronecker(&CMatrix::identity(dim_a, dim_a)) * psi;
    let ia = LabeledOperator::projector(&fed, vec![Wire::new("I", 2), Wire::new(REFERENCE, dim_a)])?;
    let yc = crate::tensor::choi_vector(&y, "O", TARGET).projector();
    let s = ia.kron(&yc)?;
    ProtocolResult::new(spec, 1.0, s.clone(), Some(s))
}

/// Result of asking for a deterministic exact protocol on a noisy input state.
#[derive(Clone, Debug)]
pub enum MixedOutcome {
    Exact(Box<ProtocolResult>),
    /// η exceeds the threshold; `best` is the exact protocol at η = threshold.
    Infeasible { threshold: f64, gap: f64, best: Box<ProtocolResult> },
}

fn mixed_at(f: Target, d: usize, psi: &CVector, eta: f64, threshold: f64) -> Result<ProtocolResult> {
    let det = golden(&pure_spec(f, Mode::Det, d, psi)?)?;
    let w = if threshold > 0.0 { eta / threshold } else { 0.0 };
    let s = det.supermap.scale_re(w).add(&noise_supermap(d, 1, None)?.scale_re(1.0 - w))?;
    let spec = ProtocolSpec::new(f, Mode::Det, d, 1, Strategy::Parallel, InputState::Mixed { psi: psi.clone(), eta })?;
    ProtocolResult::new(spec, 1.0, s, None)
}

/// Mixes the covariant deterministic protocol, whose output is already
/// η*·f(U)ψψf(U)† + (1−η*)·1/d, with the noise supermap.
pub fn mixed_state_protocol(f: Target, d: usize, psi: &CVector, eta: f64) -> Result<MixedOutcome> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("visibility {eta} outside [0, 1]")));
    }
    let threshold = visibility_threshold(f, d);
    if eta <= threshold + 1e-12 {
        Ok(MixedOutcome::Exact(Box::new(mixed_at(f, d, psi, eta.min(threshold), threshold)?)))
    } else {
        Ok(MixedOutcome::Infeasible {
            threshold,
            gap: eta - threshold,
            best: Box::new(mixed_at(f, d, psi, threshold, threshold)?),
        })
    }
}

/// Runs one single-call attempt per slot and keeps the first success:
/// p = 1 − (1 − 1/d)^k. Encoder/decoder are included when d^{2k+1} ≤ 1024.
pub fn rus_transposition(d: usize, k: usize, psi: &CVector) -> Result<ProtocolResult> {
    let spec = ProtocolSpec::new(Target::Trans, Mode::Prob, d, k, Strategy::Parallel, InputState::Pure { psi: psi.clone() })?;
    let inv_d = 1.0 / d as f64;
    let (ins, outs) = (wires::inputs(k), wires::outputs(k));
    let mut s = LabeledOperator::zeros(spec.supermap_wires())?;
    for j in 0..k {
        let mut ops = Vec::new();
        for i in 0..k {
            if i < j {
                ops.push(ident(&outs[i], d).sub(&proj(psi, &outs[i])?)?);
                ops.push(ident(&ins[i], d).scale_re(inv_d));
            } else if i == j {
                ops.push(proj(psi, &outs[i])?);
                ops.push(max_entangled_projector(d, &ins[i], TARGET)?);
            } else {
                ops.push(ident(&ins[i], d).scale_re(inv_d));
                ops.push(ident(&outs[i], d));
            }
        }
        s = s.add(&kron_all(&ops)?)?;
    }
    let mut ops = Vec::new();
    for i in 0..k {
        ops.push(ident(&outs[i], d).sub(&proj(psi, &outs[i])?)?);
        ops.push(ident(&ins[i], d).scale_re(inv_d));
    }
    ops.push(ident(TARGET, d).scale_re(inv_d));
    let fail = kron_all(&ops)?;
    let total = s.add(&fail)?;
    let value = 1.0 - (1.0 - inv_d).powi(k as i32);
    let mut r = ProtocolResult::new(spec, value, s, Some(total))?;
    if d.pow(2 * k as u32 + 1) <= 1024 {
        r.implementation = Some(rus_implementation(d, k, psi)?);
    }
    Ok(r)
}

fn rus_implementation(d: usize, k: usize, psi: &CVector) -> Result<Implementation> {
    let outs = wires::outputs(k);
    let mems: Vec<String> = (0..k).map(|j| wires::memory(j, k)).collect();
    let mut enc = Vec::new();
    for j in 0..k {
        enc.push(max_entangled_projector(d, &wires::input(j, k), &mems[j])?);
    }
    let encoder = kron_all(&enc)?.canonical()?;
    let mut decoder: Option<LabeledOperator> = None;
    for j in 0..k {
        let mut ops = Vec::new();
        for i in 0..k {
            if i < j {
                ops.push(ident(&outs[i], d).sub(&proj(psi, &outs[i])?)?);
                ops.push(ident(&mems[i], d));
            } else if i == j {
                ops.push(proj(psi, &outs[i])?);
                ops.push(choi_identity(d, &mems[i], TARGET)?);
            } else {
                ops.push(ident(&outs[i], d));
                ops.push(ident(&mems[i], d));
            }
        }
        let term = kron_all(&ops)?;
        decoder = Some(match decoder {
            None => term,
            Some(acc) => acc.add(&term)?,
        });
    }
    let mut ops = Vec::new();
    for i in 0..k {
        ops.push(ident(&outs[i], d).sub(&proj(psi, &outs[i])?)?);
        ops.push(ident(&mems[i], d));
    }
    ops.push(ident(TARGET, d).scale_re(1.0 / d as f64));
    Ok(Implementation {
        encoder,
        decoder: decoder.expect("k ≥ 1").canonical()?,
        decoder_failure: Some(kron_all(&ops)?.canonical()?),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    ToSar,
    ToTransposition,
}

/// Swaps the slot outputs and the memory in the decoder: a parallel transposition
/// protocol with a state-independent encoder becomes a storage-and-retrieval
/// protocol with the same figure of merit, and back.
pub fn sar_convert(result: &ProtocolResult, direction: Direction) -> Result<ProtocolResult> {
    let (from, to) = match direction {
        Direction::ToSar => (Target::Trans, Target::Sar),
        Direction::ToTransposition => (Target::Sar, Target::Trans),
    };
    if result.spec.f != from {
        return Err(Error::InvalidInput(format!("expected a {from} protocol, got {}", result.spec.f)));
    }
    if result.spec.strategy != Strategy::Parallel {
        return Err(Error::InvalidInput("conversion needs a parallel protocol".into()));
    }
    let im = result
        .implementation
        .as_ref()
        .ok_or_else(|| Error::Unsupported("protocol carries no encoder/decoder factorization".into()))?;
    let k = result.spec.k;
    let d = result.spec.d;

    // The encoder's slot-input marginal must commute with U^{⊗k}.
    let mems: Vec<String> = (0..k).map(|j| wires::memory(j, k)).collect();
    let marginal = im.encoder.partial_trace(&wires::refs(&mems))?;
    let rep = RepSpec::new(d, wires::inputs(k).into_iter().map(|l| (l, Action::U)).collect());
    if twirl(&marginal, &rep)?.max_abs_diff(&marginal)? > 1e-9 {
        return Err(Error::InvalidInput("encoder is not covariant; conversion does not apply".into()));
    }

    let outs = wires::outputs(k);
    let swap: Vec<(&str, &str)> = outs
        .iter()
        .zip(&mems)
        .flat_map(|(o, m)| [(o.as_str(), m.as_str()), (m.as_str(), o.as_str())])
        .collect();
    let decoder = im.decoder.clone().relabel(&swap)?.canonical()?;
    let failure = im
        .decoder_failure
        .as_ref()
        .map(|f| f.clone().relabel(&swap).and_then(|x| x.canonical()))
        .transpose()?;
    let s = im.encoder.link(&decoder)?;
    let total = match &failure {
        Some(fd) => Some(s.add(&im.encoder.link(fd)?)?),
        None => result.total.as_ref().map(|_| s.clone()),
    };
    let spec = ProtocolSpec { f: to, ..result.spec.clone() };
    let mut r = ProtocolResult::new(spec, result.value, s, total)?;
    r.implementation = Some(Implementation {
        encoder: im.encoder.clone(),
        decoder,
        decoder_failure: failure,
    });
    r.filter = result.filter.clone();
    Ok(r)
}

/// The closed-form optimal protocol for `spec`, where one is known.
pub fn golden(spec: &ProtocolSpec) -> Result<ProtocolResult> {
    spec.validate()?;
    let d = spec.d;
    let no_closed_form = || {
        Error::Unsupported(format!(
            "no closed-form protocol for f={} mode={:?} k={} with this input; solve the SDP instead",
            spec.f, spec.mode, spec.k
        ))
    };
    if spec.k > 1 {
        let r = match (spec.f, spec.mode, &spec.state) {
            (Target::Trans, Mode::Prob, InputState::Pure { psi }) => rus_transposition(d, spec.k, psi)?,
            (Target::Sar, Mode::Prob, InputState::Pure { psi }) => {
                sar_convert(&rus_transposition(d, spec.k, psi)?, Direction::ToSar)?
            }
            _ => return Err(no_closed_form()),
        };
        return Ok(ProtocolResult { spec: ProtocolSpec { strategy: spec.strategy, ..r.spec.clone() }, ..r });
    }
    let r = match (&spec.state, spec.f, spec.mode) {
        (InputState::Mixed { psi, eta }, f, _) => match mixed_state_protocol(f, d, psi, *eta)? {
            MixedOutcome::Exact(r) => *r,
            MixedOutcome::Infeasible { threshold, .. } => {
                return Err(Error::InvalidInput(format!(
                    "visibility {eta} exceeds the threshold {threshold:.6} for exact deterministic {f}"
                )))
            }
        },
        (InputState::Bipartite { .. }, f, Mode::Prob) => {
            let (psi, dim_a) = bipartite_parts(spec)?;
            match f {
                Target::Trans => bipartite_transposition(d, &psi, dim_a)?,
                Target::Inv => bipartite_inversion(d, &psi, dim_a)?,
                Target::Conj => bipartite_conjugation(d, &psi, dim_a)?,
                Target::Sar => sar_convert(&bipartite_transposition(d, &psi, dim_a)?, Direction::ToSar)?,
            }
        }
        (InputState::Bipartite { .. }, _, Mode::Det) => return Err(no_closed_form()),
        (InputState::Pure { psi }, f, mode) => match (f, mode) {
            (Target::Trans, Mode::Prob) => optimal_prob_transposition(d, psi)?,
            (Target::Trans, Mode::Det) => optimal_det_transposition(d, psi)?,
            (Target::Conj, Mode::Prob) => optimal_prob_conjugation(d, psi)?,
            (Target::Conj, Mode::Det) => optimal_det_conjugation(d, psi)?,
            (Target::Inv, Mode::Prob) => optimal_prob_inversion(d, psi)?,
            (Target::Inv, Mode::Det) => optimal_det_inversion(d, psi)?,
            (Target::Sar, mode) => sar_convert(&transposition(pure_spec(Target::Trans, mode, d, psi)?)?, Direction::ToSar)?,
        },
    };
    Ok(ProtocolResult { spec: ProtocolSpec { strategy: spec.strategy, ..r.spec.clone() }, ..r })
}
