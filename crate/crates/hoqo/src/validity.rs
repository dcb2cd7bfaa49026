//! Constraint checkers for supermaps that turn k channels into a state, plus
//! covariance and defining-equation verifiers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::apply_supermap;
use crate::task::{ProtocolSpec, Strategy};
use crate::tensor::{c, choi_power, haar_unitary, CMatrix, CVector, LabeledOperator, Wire, C64};
use crate::twirl::{stabilizer_sample, RepSpec};
use crate::wires;

pub const PSD_TOL: f64 = 1e-9;
pub const EQ_TOL: f64 = 1e-9;
pub const COVARIANCE_SAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub overall: bool,
}

impl VerificationReport {
    pub fn new() -> Self {
        VerificationReport { checks: Vec::new(), overall: true }
    }

    pub fn push(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        let pass = residual.is_finite() && residual <= tolerance;
        self.overall &= pass;
        self.checks.push(Check { name: name.into(), residual, tolerance, pass });
    }

    /// Records a check whose residual is a lower bound that must stay above −tol.
    pub fn push_floor(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        let pass = value.is_finite() && value >= -tolerance;
        self.overall &= pass;
        self.checks.push(Check { name: name.into(), residual: value, tolerance, pass });
    }

    pub fn merge(&mut self, prefix: &str, other: VerificationReport) {
        for ch in other.checks {
            self.overall &= ch.pass;
            self.checks.push(Check { name: format!("{prefix}{}", ch.name), ..ch });
        }
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Two-column text table for terminals.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for ch in &self.checks {
            s.push_str(&format!(
                "{:<4} {:<32} {:>12.3e}  (tol {:.0e})\n",
                if ch.pass { "ok" } else { "FAIL" },
                ch.name,
                ch.residual,
                ch.tolerance
            ));
        }
        s
    }
}

fn diff(a: &LabeledOperator, b: &LabeledOperator) -> Result<f64> {
    a.max_abs_diff(b)
}

/// Labels of the final output registers (F, and A for bipartite tasks).
fn output_labels(s: &LabeledOperator) -> Vec<String> {
    s.labels()
        .into_iter()
        .filter(|l| !(l.starts_with('I') || l.starts_with('O')))
        .map(String::from)
        .collect()
}

fn require(s: &LabeledOperator, labels: &[String]) -> Result<()> {
    for l in labels {
        if !s.has_label(l) {
            return Err(Error::UnknownLabel(l.clone()));
        }
    }
    Ok(())
}

fn with(base: &[String], extra: &[String]) -> Vec<String> {
    base.iter().chain(extra).cloned().collect()
}

fn tr(s: &LabeledOperator, labels: &[String]) -> Result<LabeledOperator> {
    if labels.is_empty() {
        return Ok(s.clone());
    }
    s.trace_replace(&wires::refs(labels))
}

fn psd_and_trace(report: &mut VerificationReport, s: &LabeledOperator, d: usize, k: usize) {
    report.push("hermitian", s.hermitian_defect(), EQ_TOL);
    report.push_floor("psd", s.min_eigenvalue(), PSD_TOL);
    let want = (d as f64).powi(k as i32);
    report.push("trace", (s.trace() - c(want)).norm(), EQ_TOL * want.max(1.0));
}

/// k = 1: S ≥ 0, Tr_F S = Tr_{OF} S ⊗ 1_O/d, Tr S = d.
pub fn check_channel_to_state_superchannel(s: &LabeledOperator) -> Result<VerificationReport> {
    let d = s.wire_dim("O")?;
    s.wire_dim("I")?;
    check_parallel(s, d, 1)
}

/// Tr_F S = Tr_{OF} S ⊗ 1_O/d^k with all slots side by side.
pub fn check_parallel(s: &LabeledOperator, d: usize, k: usize) -> Result<VerificationReport> {
    let (ins, outs) = (wires::inputs(k), wires::outputs(k));
    require(s, &with(&ins, &outs))?;
    let f = output_labels(s);
    let mut r = VerificationReport::new();
    psd_and_trace(&mut r, s, d, k);
    let a = tr(s, &f)?;
    let b = tr(s, &with(&f, &outs))?;
    r.push("marginal", diff(&a, &b)?, EQ_TOL);
    Ok(r)
}

/// Nested comb conditions: _{F,I>j,O>j} S = _{F,I>j,O>j,O_j} S for every j.
pub fn check_sequential(s: &LabeledOperator, d: usize, k: usize) -> Result<VerificationReport> {
    let (ins, outs) = (wires::inputs(k), wires::outputs(k));
    require(s, &with(&ins, &outs))?;
    let f = output_labels(s);
    let mut r = VerificationReport::new();
    psd_and_trace(&mut r, s, d, k);
    for j in (0..k).rev() {
        let mut base = f.clone();
        base.extend(ins[j + 1..].iter().cloned());
        base.extend(outs[j + 1..].iter().cloned());
        let a = tr(s, &base)?;
        let b = tr(s, &with(&base, &outs[j..=j]))?;
        r.push(format!("comb-{}", j + 1), diff(&a, &b)?, EQ_TOL);
    }
    Ok(r)
}

/// Two slots in no fixed order.
pub fn check_general_k2(s: &LabeledOperator, d: usize) -> Result<VerificationReport> {
    let (ins, outs) = (wires::inputs(2), wires::outputs(2));
    require(s, &with(&ins, &outs))?;
    let f = output_labels(s);
    let mut r = VerificationReport::new();
    psd_and_trace(&mut r, s, d, 2);
    let (i1, i2, o1, o2) = (&ins[0], &ins[1], &outs[0], &outs[1]);

    let base_a = with(&f, &[i1.clone(), o1.clone()]);
    r.push(
        "general-a",
        diff(&tr(s, &base_a)?, &tr(s, &with(&base_a, std::slice::from_ref(o2)))?)?,
        EQ_TOL,
    );
    let base_b = with(&f, &[i2.clone(), o2.clone()]);
    r.push(
        "general-b",
        diff(&tr(s, &base_b)?, &tr(s, &with(&base_b, std::slice::from_ref(o1)))?)?,
        EQ_TOL,
    );
    // _F (1 − _{O1})(1 − _{O2}) S = 0
    let t = tr(s, &f)?
        .sub(&tr(s, &with(&f, std::slice::from_ref(o1)))?)?
        .sub(&tr(s, &with(&f, std::slice::from_ref(o2)))?)?
        .add(&tr(s, &with(&f, &[o1.clone(), o2.clone()]))?)?;
    let z = t.entries().iter().map(|x| x.norm()).fold(0.0, f64::max);
    r.push("general-c", z, EQ_TOL);
    Ok(r)
}

pub fn check_class(s: &LabeledOperator, strategy: Strategy, d: usize, k: usize) -> Result<VerificationReport> {
    match strategy {
        Strategy::Parallel => check_parallel(s, d, k),
        Strategy::Sequential => check_sequential(s, d, k),
        Strategy::General => match k {
            1 => check_parallel(s, d, 1),
            2 => check_general_k2(s, d),
            _ => Err(Error::Unsupported("general strategies are only defined for k ≤ 2".into())),
        },
    }
}

/// 0 ≤ S ≤ S_ch with S_ch in the class.
pub fn check_superinstrument(
    success: &LabeledOperator,
    total: &LabeledOperator,
    strategy: Strategy,
    d: usize,
    k: usize,
) -> Result<VerificationReport> {
    let mut r = VerificationReport::new();
    r.push_floor("success-psd", success.min_eigenvalue(), PSD_TOL);
    r.push_floor("remainder-psd", total.sub(success)?.min_eigenvalue(), PSD_TOL);
    r.merge("total-", check_class(total, strategy, d, k)?);
    Ok(r)
}

/// Largest ‖rep(U) S rep(U)† − S‖ over the given unitaries.
pub fn invariance_defect(s: &LabeledOperator, rep: &RepSpec, unitaries: &[CMatrix]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for u in unitaries {
        worst = worst.max(rep.commutator_defect(s, u)?);
    }
    Ok(worst)
}

pub fn check_covariance<R: Rng + ?Sized>(
    s: &LabeledOperator,
    rep: &RepSpec,
    samples: usize,
    rng: &mut R,
) -> Result<VerificationReport> {
    let us: Vec<CMatrix> = (0..samples).map(|_| haar_unitary(rep.d, rng)).collect::<Result<_>>()?;
    let mut r = VerificationReport::new();
    r.push("covariance", invariance_defect(s, rep, &us)?, EQ_TOL);
    Ok(r)
}

/// Invariance under the U_f symmetry and under the stabilizer symmetry V_f of ψ.
pub fn check_protocol_covariance<R: Rng + ?Sized>(
    s: &LabeledOperator,
    spec: &ProtocolSpec,
    samples: usize,
    rng: &mut R,
) -> Result<VerificationReport> {
    let mut r = check_covariance(s, &spec.f.covariance_rep(spec.d, spec.k), samples, rng)?;
    let psi = system_direction(spec);
    if let Some(psi) = psi {
        let rep = spec.f.stabilizer_rep(spec.d, spec.k);
        let vs: Vec<CMatrix> = (0..samples)
            .map(|_| stabilizer_sample(spec.f, &psi, rng))
            .collect::<Result<_>>()?;
        r.push("stabilizer-covariance", invariance_defect(s, &rep, &vs)?, EQ_TOL);
    }
    Ok(r)
}

/// The system vector for pure and mixed inputs; bipartite states have no single one.
fn system_direction(spec: &ProtocolSpec) -> Option<CVector> {
    match &spec.state {
        crate::task::InputState::Bipartite { .. } => None,
        st => Some(st.psi().clone()),
    }
}

/// Max entrywise residual of S * |U⟩⟩⟨⟨U|^{⊗k} − p·f(U)ρf(U)†.
pub fn defining_residual(s: &LabeledOperator, spec: &ProtocolSpec, p: f64, u: &CMatrix) -> Result<f64> {
    let out = apply_supermap(s, u, spec.k)?;
    let want = spec.target_output(u)?.scale_re(p);
    out.max_abs_diff(&want)
}

/// Checks S * |U⟩⟩⟨⟨U|^{⊗k} = p·f(U)ρf(U)† on Haar samples; with `p = None` the value
/// is read off at U = 1. For a covariant S the U = 1 check alone must already decide.
pub fn verify_defining_equation<R: Rng + ?Sized>(
    s: &LabeledOperator,
    spec: &ProtocolSpec,
    p: Option<f64>,
    n_samples: usize,
    rng: &mut R,
) -> Result<VerificationReport> {
    let d = spec.d;
    let id = CMatrix::identity(d, d);
    let p = match p {
        Some(p) => p,
        None => apply_supermap(s, &id, spec.k)?.trace().re,
    };
    let mut r = VerificationReport::new();
    let at_id = defining_residual(s, spec, p, &id)?;
    r.push("defining-eq-identity", at_id, EQ_TOL);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let u = haar_unitary(d, rng)?;
        worst = worst.max(defining_residual(s, spec, p, &u)?);
    }
    r.push("defining-eq-haar", worst, EQ_TOL);

    let cov = check_protocol_covariance(s, spec, 20, rng)?;
    if cov.overall {
        // covariant: identity pass ⇒ sample pass
        let consistent = at_id > EQ_TOL || at_id.is_nan() || worst <= EQ_TOL;
        r.push("covariant-identity-suffices", if consistent { 0.0 } else { worst }, EQ_TOL);
    }
    Ok(r)
}

/// Fidelity ⟨f(U)ψ|S * |U⟩⟩⟨⟨U|^{⊗k}|f(U)ψ⟩ for each U (pure or bipartite input).
pub fn per_u_fidelities(s: &LabeledOperator, spec: &ProtocolSpec, unitaries: &[CMatrix]) -> Result<Vec<f64>> {
    unitaries
        .iter()
        .map(|u| {
            let out = apply_supermap(s, u, spec.k)?;
            let target = spec.target_output(u)?;
            Ok(out.hs_inner(&target)?.re)
        })
        .collect()
}

/// Mean and spread (max − min) of the per-U fidelity over Haar samples.
pub fn fidelity_statistics<R: Rng + ?Sized>(
    s: &LabeledOperator,
    spec: &ProtocolSpec,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let us: Vec<CMatrix> = (0..samples).map(|_| haar_unitary(spec.d, rng)).collect::<Result<_>>()?;
    let f = per_u_fidelities(s, spec, &us)?;
    let mean = f.iter().sum::<f64>() / f.len().max(1) as f64;
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean, hi - lo))
}

#[derive(Clone, Debug)]
pub struct SpanningSet {
    pub d: usize,
    pub k: usize,
    pub unitaries: Vec<CMatrix>,
    pub rank: usize,
}

pub const SPAN_WINDOW: usize = 10;
pub const SPAN_TOL: f64 = 1e-8;

/// Incremental orthonormalization of vec(|U⟩⟩⟨⟨U|^{⊗k}).
#[derive(Clone, Debug, Default)]
pub struct SpanTracker {
    basis: Vec<CVector>,
}

impl SpanTracker {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Adds `v` if it leaves the current span; returns whether it did.
    pub fn offer(&mut self, v: CVector) -> bool {
        let norm = v.norm();
        if norm == 0.0 {
            return false;
        }
        let mut r = v;
        for _ in 0..2 {
            for q in &self.basis {
                let coef = q.dotc(&r);
                r.axpy(-coef, q, C64::new(1.0, 0.0));
            }
        }
        let rn = r.norm();
        if rn > SPAN_TOL * norm {
            self.basis.push(r / c(rn));
            true
        } else {
            false
        }
    }
}

pub fn choi_power_vector(u: &CMatrix, k: usize) -> Result<CVector> {
    let m = choi_power(u, k)?;
    Ok(CVector::from_iterator(m.dim() * m.dim(), m.entries().iter().copied()))
}

/// Samples Haar unitaries until SPAN_WINDOW consecutive samples add nothing.
pub fn spanning_set<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<SpanningSet> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidInput("need d ≥ 1 and k ≥ 1".into()));
    }
    let mut tracker = SpanTracker::default();
    let mut kept = Vec::new();
    let mut idle = 0;
    while idle < SPAN_WINDOW {
        let u = haar_unitary(d, rng)?;
        if tracker.offer(choi_power_vector(&u, k)?) {
            kept.push(u);
            idle = 0;
        } else {
            idle += 1;
        }
    }
    Ok(SpanningSet { d, k, rank: tracker.rank(), unitaries: kept })
}

/// Random CPTP Choi operator on (inputs…, outputs…): X ≥ 0 normalized so Tr_out = 1_in.
pub fn random_channel<R: Rng + ?Sized>(inputs: &[Wire], outputs: &[Wire], rng: &mut R) -> Result<LabeledOperator> {
    let mut ws = inputs.to_vec();
    ws.extend(outputs.iter().cloned());
    let x = random_psd(&ws, rng)?;
    let out_labels: Vec<&str> = outputs.iter().map(|w| w.label.as_str()).collect();
    let marg = x.partial_trace(&out_labels)?;
    let eig = crate::tensor::robust_eigen(marg.entries());
    let inv_sqrt = &eig.eigenvectors
        * CMatrix::from_diagonal(&eig.eigenvalues.map(|v| c(1.0 / v.max(1e-300).sqrt())))
        * eig.eigenvectors.adjoint();
    let din: usize = inputs.iter().map(|w| w.dim).product();
    let dout: usize = outputs.iter().map(|w| w.dim).product();
    let n = inv_sqrt.kronecker(&CMatrix::identity(dout, dout));
    debug_assert_eq!(n.nrows(), din * dout);
    LabeledOperator::new(&n * x.entries() * &n, ws)
}

/// Random full-rank positive operator G G†.
pub fn random_psd<R: Rng + ?Sized>(ws: &[Wire], rng: &mut R) -> Result<LabeledOperator> {
    use rand_distr::StandardNormal;
    let n: usize = ws.iter().map(|w| w.dim).product();
    let g = CMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    LabeledOperator::new(&g * g.adjoint(), ws.to_vec())
}

pub fn random_state<R: Rng + ?Sized>(ws: &[Wire], rng: &mut R) -> Result<LabeledOperator> {
    let x = random_psd(ws, rng)?;
    let t = x.trace().re;
    Ok(x.scale_re(1.0 / t))
}

/// ρ_{I…M} * D_{M O… → F}: a random parallel strategy with a d-dimensional memory.
pub fn random_parallel<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<LabeledOperator> {
    let mut st: Vec<Wire> = wires::inputs(k).into_iter().map(|l| Wire::new(l, d)).collect();
    st.push(Wire::new("M", d));
    let rho = random_state(&st, rng)?;
    let mut dec_in: Vec<Wire> = wires::outputs(k).into_iter().map(|l| Wire::new(l, d)).collect();
    dec_in.push(Wire::new("M", d));
    let dec = random_channel(&dec_in, &[Wire::new(wires::TARGET, d)], rng)?;
    rho.link(&dec)?.canonical()
}

/// A random comb: state on (I1, M1), channels (O_j, M_j) → (I_{j+1}, M_{j+1}), then (O_k, M_k) → F.
pub fn random_sequential<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<LabeledOperator> {
    let mem = |j: usize| format!("M{}", j + 1);
    let mut acc = random_state(&[Wire::new(wires::input(0, k), d), Wire::new(mem(0), d)], rng)?;
    for j in 0..k {
        let ins = [Wire::new(wires::output(j, k), d), Wire::new(mem(j), d)];
        let outs: Vec<Wire> = if j + 1 < k {
            vec![Wire::new(wires::input(j + 1, k), d), Wire::new(mem(j + 1), d)]
        } else {
            vec![Wire::new(wires::TARGET, d)]
        };
        acc = acc.link(&random_channel(&ins, &outs, rng)?)?;
    }
    acc.canonical()
}

/// Everything checkable about a stored protocol: class (or superinstrument), covariance,
/// the defining equation for exact protocols, and constant fidelity for approximate ones.
pub fn verify_protocol<R: Rng + ?Sized>(
    result: &crate::protocols::ProtocolResult,
    samples: usize,
    rng: &mut R,
) -> Result<VerificationReport> {
    use crate::task::{InputState, Mode};
    let spec = &result.spec;
    spec.validate()?;
    let s = &result.supermap;
    let (d, k) = (spec.d, spec.k);
    let mut r = VerificationReport::new();
    let exact = spec.mode == Mode::Prob || matches!(spec.state, InputState::Mixed { .. });
    if exact {
        let p = if spec.mode == Mode::Prob { result.value } else { 1.0 };
        r.merge("", verify_defining_equation(s, spec, Some(p), samples, rng)?);
    }
    match (spec.mode, &result.total) {
        (Mode::Prob, Some(total)) => r.merge("", check_superinstrument(s, total, spec.strategy, d, k)?),
        (Mode::Prob, None) => r.push_floor("success-psd", s.min_eigenvalue(), PSD_TOL),
        (Mode::Det, _) => r.merge("class-", check_class(s, spec.strategy, d, k)?),
    }
    if !matches!(spec.state, InputState::Mixed { .. }) {
        let omega = crate::twirl::performance_operator(spec)?;
        let v = s.hs_inner(&omega)?.re;
        r.push("value", (v - result.value).abs(), 1e-9);
        if spec.mode == Mode::Det {
            let (mean, spread) = fidelity_statistics(s, spec, samples.max(2), rng)?;
            r.push("fidelity-spread", spread, 1e-9);
            r.push("fidelity-mean", (mean - result.value).abs(), 1e-9);
        }
    }
    r.merge("", check_protocol_covariance(s, spec, samples.min(COVARIANCE_SAMPLES), rng)?);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_channel_is_trace_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = random_channel(&[Wire::new("a", 2)], &[Wire::new("b", 3)], &mut rng).unwrap();
        let m = ch.partial_trace(&["b"]).unwrap();
        let id = LabeledOperator::identity(vec![Wire::new("a", 2)]).unwrap();
        assert!(m.max_abs_diff(&id).unwrap() < 1e-10);
        assert!(ch.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn random_strategies_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_parallel(2, 2, &mut rng).unwrap();
        assert!(check_parallel(&p, 2, 2).unwrap().overall);
        let s = random_sequential(2, 2, &mut rng).unwrap();
        let rep = check_sequential(&s, 2, 2).unwrap();
        assert!(rep.overall, "{}", rep.render());
        // a generic comb signals from slot 1 to slot 2
        assert!(!check_parallel(&s, 2, 2).unwrap().overall);
    }

    #[test]
    fn identity_fails_marginal() {
        let ws = crate::tensor::wires(&[("I", 2), ("O", 2), ("F", 2)]);
        let id = LabeledOperator::identity(ws).unwrap().scale_re(0.25);
        let r = check_parallel(&id, 2, 1).unwrap();
        assert!(r.get("marginal").unwrap().pass);
        let bad = LabeledOperator::identity(crate::tensor::wires(&[("I", 2), ("O", 2), ("F", 2)])).unwrap();
        assert!(!check_parallel(&bad, 2, 1).unwrap().overall);
    }

    #[test]
    fn span_ranks_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(spanning_set(2, 1, &mut rng).unwrap().rank, 10);
        assert_eq!(spanning_set(3, 1, &mut rng).unwrap().rank, 65);
    }
}
