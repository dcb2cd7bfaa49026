//! What a protocol is asked to do: the target function f, the known input state,
//! the number of calls, the strategy class and the figure of merit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{c, CMatrix, CVector, LabeledOperator, Wire, C64};
use crate::twirl::{Action, RepSpec};
use crate::wires;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[serde(alias = "transpose", alias = "transposition")]
    Trans,
    #[serde(alias = "conjugate", alias = "conjugation")]
    Conj,
    #[serde(alias = "invert", alias = "inversion")]
    Inv,
    /// Storage and retrieval: f(U) = U.
    Sar,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::Trans, Target::Conj, Target::Inv, Target::Sar];

    pub fn apply(self, u: &CMatrix) -> CMatrix {
        match self {
            Target::Trans => u.transpose(),
            Target::Conj => u.conjugate(),
            Target::Inv => u.adjoint(),
            Target::Sar => u.clone(),
        }
    }

    /// Inverse of `apply`: the V with f(V) = B.
    pub fn preimage(self, b: &CMatrix) -> CMatrix {
        match self {
            Target::Trans => b.transpose(),
            Target::Conj => b.conjugate(),
            Target::Inv => b.adjoint(),
            Target::Sar => b.clone(),
        }
    }

    /// f(UV) = f(U)f(V) (as opposed to f(UV) = f(V)f(U)).
    pub fn is_homomorphism(self) -> bool {
        matches!(self, Target::Conj | Target::Sar)
    }

    /// The unitary symmetry U_f of every optimal k-slot supermap for this target.
    pub fn covariance_rep(self, d: usize, k: usize) -> RepSpec {
        let mut factors = Vec::new();
        match self {
            Target::Trans => {
                factors.extend(wires::inputs(k).into_iter().map(|l| (l, Action::U)));
                factors.push((wires::TARGET.to_string(), Action::UBar));
            }
            Target::Inv => {
                factors.extend(wires::inputs(k).into_iter().map(|l| (l, Action::U)));
                factors.push((wires::TARGET.to_string(), Action::U));
            }
            Target::Conj => {
                factors.extend(wires::outputs(k).into_iter().map(|l| (l, Action::U)));
                factors.push((wires::TARGET.to_string(), Action::U));
            }
            Target::Sar => {
                factors.extend(wires::outputs(k).into_iter().map(|l| (l, Action::UBar)));
                factors.push((wires::TARGET.to_string(), Action::U));
            }
        }
        RepSpec::new(d, factors)
    }

    /// The symmetry V_f generated by unitaries V with f(V)|ψ⟩ ∝ |ψ⟩: Ū on the slot
    /// outputs for antihomomorphic f, U on the slot inputs for homomorphic f.
    pub fn stabilizer_rep(self, d: usize, k: usize) -> RepSpec {
        let factors = if self.is_homomorphism() {
            wires::inputs(k).into_iter().map(|l| (l, Action::U)).collect()
        } else {
            wires::outputs(k).into_iter().map(|l| (l, Action::UBar)).collect()
        };
        RepSpec::new(d, factors)
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Trans => "trans",
            Target::Conj => "conj",
            Target::Inv => "inv",
            Target::Sar => "sar",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trans" | "transpose" | "transposition" => Ok(Target::Trans),
            "conj" | "conjugate" | "conjugation" => Ok(Target::Conj),
            "inv" | "invert" | "inversion" => Ok(Target::Inv),
            "sar" | "identity" => Ok(Target::Sar),
            other => Err(Error::InvalidInput(format!("unknown target function `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact output with some success probability p.
    #[serde(alias = "probabilistic")]
    Prob,
    /// Always succeeds, output judged by average fidelity.
    #[serde(alias = "deterministic")]
    Det,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Prob => "prob",
            Mode::Det => "det",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prob" | "probabilistic" | "p" => Ok(Mode::Prob),
            "det" | "deterministic" | "f" => Ok(Mode::Det),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[serde(alias = "par")]
    Parallel,
    /// Quantum comb; "adaptive" in table headings.
    #[serde(alias = "seq", alias = "adaptive")]
    Sequential,
    #[serde(alias = "gen")]
    General,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Parallel, Strategy::Sequential, Strategy::General];

    pub fn short(self) -> &'static str {
        match self {
            Strategy::Parallel => "par",
            Strategy::Sequential => "seq",
            Strategy::General => "gen",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "par" | "parallel" => Ok(Strategy::Parallel),
            "seq" | "sequential" | "adaptive" | "comb" => Ok(Strategy::Sequential),
            "gen" | "general" => Ok(Strategy::General),
            other => Err(Error::InvalidInput(format!("unknown strategy `{other}`"))),
        }
    }
}

mod cvec_serde {
    use super::{CVector, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVector::from_iterator(
            pairs.len(),
            pairs.into_iter().map(|[re, im]| C64::new(re, im)),
        ))
    }
}

/// The classically known input state. Bipartite vectors are ordered system ⊗ reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputState {
    Pure {
        #[serde(with = "cvec_serde")]
        psi: CVector,
    },
    Bipartite {
        #[serde(with = "cvec_serde")]
        psi: CVector,
        dim_a: usize,
    },
    /// η|ψ⟩⟨ψ| + (1−η)·1/d.
    Mixed {
        #[serde(with = "cvec_serde")]
        psi: CVector,
        eta: f64,
    },
}

impl InputState {
    pub fn basis(d: usize, i: usize) -> Self {
        let mut psi = CVector::zeros(d);
        psi[i] = c(1.0);
        InputState::Pure { psi }
    }

    pub fn psi(&self) -> &CVector {
        match self {
            InputState::Pure { psi } | InputState::Bipartite { psi, .. } | InputState::Mixed { psi, .. } => psi,
        }
    }

    pub fn dim_a(&self) -> usize {
        match self {
            InputState::Bipartite { dim_a, .. } => *dim_a,
            _ => 1,
        }
    }

    /// Bipartite state with the given Schmidt coefficients (squared amplitudes) in the
    /// computational basis, reference dimension equal to the number of coefficients.
    pub fn schmidt(d: usize, weights: &[f64]) -> Result<Self> {
        let r = weights.len();
        if r == 0 || r > d {
            return Err(Error::InvalidInput(format!("need 1..={d} Schmidt weights, got {r}")));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || total <= 0.0 {
            return Err(Error::InvalidInput("Schmidt weights must be nonnegative".into()));
        }
        let mut psi = CVector::zeros(d * r);
        for (i, w) in weights.iter().enumerate() {
            psi[i * r + i] = c((w / total).sqrt());
        }
        Ok(InputState::Bipartite { psi, dim_a: r })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub f: Target,
    pub mode: Mode,
    pub state: InputState,
    pub d: usize,
    pub k: usize,
    pub strategy: Strategy,
}

pub const UNIT_TOL: f64 = 1e-9;

impl ProtocolSpec {
    pub fn new(f: Target, mode: Mode, d: usize, k: usize, strategy: Strategy, state: InputState) -> Result<Self> {
        let s = ProtocolSpec { f, mode, state, d, k, strategy };
        s.validate()?;
        Ok(s)
    }

    /// Single call, parallel, ψ = |0⟩.
    pub fn simple(f: Target, mode: Mode, d: usize) -> Result<Self> {
        Self::new(f, mode, d, 1, Strategy::Parallel, InputState::basis(d, 0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidInput(format!("d must be at least 2, got {}", self.d)));
        }
        if self.k < 1 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        let psi = self.state.psi();
        let expect = self.d * self.state.dim_a();
        if psi.len() != expect {
            return Err(Error::Dimension(format!(
                "state vector has length {}, expected {expect}",
                psi.len()
            )));
        }
        if (psi.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidInput(format!("state vector has norm {}", psi.norm())));
        }
        if let InputState::Mixed { eta, .. } = self.state {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidInput(format!("visibility {eta} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Output registers: F, plus A for bipartite inputs.
    pub fn output_wires(&self) -> Vec<Wire> {
        let mut w = vec![Wire::new(wires::TARGET, self.d)];
        if let InputState::Bipartite { dim_a, .. } = self.state {
            w.push(Wire::new(wires::REFERENCE, dim_a));
        }
        w
    }

    /// The ideal output f(U)ρf(U)† (with 1_A on a reference register).
    pub fn target_output(&self, u: &CMatrix) -> Result<LabeledOperator> {
        let fu = self.f.apply(u);
        match &self.state {
            InputState::Pure { psi } => {
                let v = &fu * psi;
                LabeledOperator::projector(&v, self.output_wires())
            }
            InputState::Bipartite { psi, dim_a } => {
                let full = fu.kronecker(&CMatrix::identity(*dim_a, *dim_a));
                let v = full * psi;
                LabeledOperator::projector(&v, self.output_wires())
            }
            InputState::Mixed { psi, eta } => {
                let v = &fu * psi;
                let d = self.d;
                let m = &v * v.adjoint() * c(*eta) + CMatrix::identity(d, d) * c((1.0 - eta) / d as f64);
                LabeledOperator::new(m, self.output_wires())
            }
        }
    }

    /// Supermap registers in canonical order: I…, O…, F (, A).
    pub fn supermap_wires(&self) -> Vec<Wire> {
        let mut w: Vec<Wire> = wires::inputs(self.k)
            .into_iter()
            .chain(wires::outputs(self.k))
            .map(|l| Wire::new(l, self.d))
            .collect();
        w.extend(self.output_wires());
        w
    }

    pub fn with_state(&self, state: InputState) -> Result<Self> {
        let s = ProtocolSpec { state, ..self.clone() };
        s.validate()?;
        Ok(s)
    }
}

/// A unitary W with W|0⟩ = ψ (Householder completion).
pub fn completing_unitary(psi: &CVector) -> CMatrix {
    let d = psi.len();
    // Reflection mapping e0 to a phase times ψ, then fix that phase.
    let phase = if psi[0].norm() > 1e-15 { psi[0] / psi[0].norm() } else { C64::new(1.0, 0.0) };
    let mut e0 = CVector::zeros(d);
    e0[0] = phase;
    let w = psi - &e0;
    let nw = w.norm();
    let h = if nw < 1e-14 {
        CMatrix::identity(d, d)
    } else {
        let u = w / C64::new(nw, 0.0);
        CMatrix::identity(d, d) - &u * u.adjoint() * c(2.0)
    };
    // h e0·phase = ψ  ⇒  h·diag(phase,1,…) maps |0⟩ to ψ
    let mut out = h;
    let col: CVector = out.column(0) * phase;
    out.set_column(0, &col);
    out
}
