//! Monte Carlo repeat-until-success: up to k single-call attempts, each a fresh run of
//! the one-slot probabilistic protocol with outcomes drawn from its Born probabilities.

use crate::error::{Error, Result};
use crate::protocols::{self, apply_supermap, sar_convert, Direction};
use crate::task::{InputState, Target};
use crate::tensor::{c, haar_unitary, CMatrix, CVector, LabeledOperator, Wire, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Success-branch outputs are compared with the target once per this many trials.
pub const STATE_CHECK_EVERY: u64 = 1000;

#[derive(Clone, Debug)]
pub enum ChannelModel {
    /// A fresh Haar-random unitary per trial, used for all of that trial's attempts.
    Haar,
    /// A fixed channel given by its Choi operator on (I, O).
    Fixed(LabeledOperator),
}

#[derive(Clone, Debug)]
pub struct RusConfig {
    pub d: usize,
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    /// Pure or bipartite.
    pub input: InputState,
    pub channel: ChannelModel,
    /// Trans (output Uᵀψ) or Sar (output Uψ).
    pub target: Target,
}

impl RusConfig {
    /// Pure |0⟩ input, Haar channel, transposition.
    pub fn pure(d: usize, k: usize, trials: u64, seed: u64) -> Self {
        RusConfig {
            d,
            k,
            trials,
            seed,
            input: InputState::basis(d.max(1), 0),
            channel: ChannelModel::Haar,
            target: Target::Trans,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.trials == 0 {
            return Err(Error::InvalidInput("need d ≥ 1, k ≥ 1 and at least one trial".into()));
        }
        if !matches!(self.target, Target::Trans | Target::Sar) {
            return Err(Error::InvalidInput(format!("repeat-until-success covers trans and sar, not {}", self.target)));
        }
        match &self.input {
            InputState::Pure { psi } if psi.len() == self.d => {}
            InputState::Bipartite { psi, dim_a } if psi.len() == self.d * dim_a => {}
            InputState::Mixed { .. } => {
                return Err(Error::InvalidInput("mixed inputs cannot be re-prepared exactly".into()))
            }
            _ => return Err(Error::Dimension("input state does not match d".into())),
        }
        if let ChannelModel::Fixed(j) = &self.channel {
            if j.wire_dim("I")? != self.d || j.wire_dim("O")? != self.d || j.wires().len() != 2 {
                return Err(Error::Dimension("fixed channel must be a Choi operator on (I, O) of dim d".into()));
            }
        }
        Ok(())
    }

    /// 1 − (1 − q)^k with q the single-call success probability.
    pub fn closed_form(&self) -> f64 {
        let q = self.single_call_probability();
        1.0 - (1.0 - q).powi(self.k as i32)
    }

    /// 1/d for pure inputs, 1/(d‖Tr_A ψ‖) for bipartite ones.
    pub fn single_call_probability(&self) -> f64 {
        match &self.input {
            InputState::Bipartite { psi, dim_a } => 1.0 / (self.d as f64 * protocols::reduced_norm(psi, self.d, *dim_a)),
            _ => 1.0 / self.d as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RusStats {
    pub d: usize,
    pub k: usize,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub std_error: f64,
    /// `per_round[r]` = trials that first succeeded at attempt r + 1.
    pub per_round: Vec<u64>,
    pub mean_rounds: f64,
    pub attempts: u64,
    pub attempt_successes: u64,
    pub attempt_frequency: f64,
    pub attempt_std_error: f64,
    pub closed_form: f64,
    pub state_checks: u64,
    pub max_state_error: f64,
}

/// The one-call protocol and the success effect M = Tr_out S on (I, O).
struct SingleCall {
    effect: CMatrix,
    /// Absent for d = 1, where the only channel is a phase and every attempt succeeds.
    protocol: Option<(LabeledOperator, crate::task::ProtocolSpec)>,
}

fn single_call(cfg: &RusConfig) -> Result<SingleCall> {
    if cfg.d == 1 {
        return Ok(SingleCall { effect: CMatrix::identity(1, 1), protocol: None });
    }
    let r = match &cfg.input {
        InputState::Pure { psi } => protocols::optimal_prob_transposition(cfg.d, psi)?,
        InputState::Bipartite { psi, dim_a } => protocols::bipartite_transposition(cfg.d, psi, *dim_a)?,
        InputState::Mixed { .. } => unreachable!("validated"),
    };
    let r = if cfg.target == Target::Sar { sar_convert(&r, Direction::ToSar)? } else { r };
    let outs: Vec<String> = r
        .supermap
        .labels()
        .into_iter()
        .filter(|l| *l != "I" && *l != "O")
        .map(String::from)
        .collect();
    let outs: Vec<&str> = outs.iter().map(String::as_str).collect();
    let effect = r.supermap.partial_trace(&outs)?.permuted(&["I", "O"])?.into_entries();
    Ok(SingleCall { effect, protocol: Some((r.supermap, r.spec)) })
}

/// Choi vector of U in (I, O) order: v[i·d + o] = U[o, i].
fn choi_vec(u: &CMatrix) -> CVector {
    let d = u.nrows();
    CVector::from_fn(d * d, |n, _| u[(n % d, n / d)])
}

/// Tr[M conj(|U⟩⟩⟨⟨U|)] = vᵀ M v̄.
fn born_unitary(m: &CMatrix, u: &CMatrix) -> f64 {
    let v = choi_vec(u);
    let vbar = v.map(|z| z.conj());
    (v.transpose() * m * vbar)[(0, 0)].re.clamp(0.0, 1.0)
}

/// Tr[M Jᵀ].
fn born_channel(m: &CMatrix, j: &CMatrix) -> f64 {
    (m * j.transpose()).trace().re.clamp(0.0, 1.0)
}

#[derive(Clone, Default)]
struct Tally {
    successes: u64,
    per_round: Vec<u64>,
    rounds_on_success: u64,
    attempts: u64,
    checks: u64,
    max_err: f64,
    err: Option<String>,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.successes += o.successes;
        for (a, b) in self.per_round.iter_mut().zip(o.per_round) {
            *a += b;
        }
        self.rounds_on_success += o.rounds_on_success;
        self.attempts += o.attempts;
        self.checks += o.checks;
        self.max_err = self.max_err.max(o.max_err);
        self.err = self.err.or(o.err);
        self
    }
}

/// Per-trial generator: stream = trial index, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn simulate(cfg: &RusConfig) -> Result<RusStats> {
    cfg.validate()?;
    let (d, k) = (cfg.d, cfg.k);
    let call = single_call(cfg)?;
    let fixed = match &cfg.channel {
        ChannelModel::Fixed(j) => Some(j.permuted(&["I", "O"])?.into_entries()),
        ChannelModel::Haar => None,
    };
    let empty = Tally { per_round: vec![0; k], ..Default::default() };
    let tally = (0..cfg.trials)
        .into_par_iter()
        .fold(
            || empty.clone(),
            |mut t, trial| {
                let mut rng = trial_rng(cfg.seed, trial);
                let (p, u) = match &fixed {
                    Some(j) => (born_channel(&call.effect, j), None),
                    None => match haar_unitary(d, &mut rng) {
                        Ok(u) => (born_unitary(&call.effect, &u), Some(u)),
                        Err(e) => {
                            t.err = Some(e.to_string());
                            return t;
                        }
                    },
                };
                for r in 0..k {
                    t.attempts += 1;
                    if rng.random::<f64>() < p {
                        t.successes += 1;
                        t.per_round[r] += 1;
                        t.rounds_on_success += r as u64 + 1;
                        if trial % STATE_CHECK_EVERY == 0 {
                            if let Some(u) = &u {
                                match success_error(&call, u, p) {
                                    Ok(e) => {
                                        t.checks += 1;
                                        t.max_err = t.max_err.max(e);
                                    }
                                    Err(e) => t.err = Some(e.to_string()),
                                }
                            }
                        }
                        break;
                    }
                }
                t
            },
        )
        .reduce(|| empty.clone(), Tally::merge);
    if let Some(e) = tally.err {
        return Err(Error::Numerical(e));
    }
    let n = cfg.trials as f64;
    let p_hat = tally.successes as f64 / n;
    let att = tally.attempts as f64;
    let q = tally.successes as f64 / att;
    Ok(RusStats {
        d,
        k,
        trials: cfg.trials,
        successes: tally.successes,
        p_hat,
        std_error: (p_hat * (1.0 - p_hat) / n).sqrt(),
        mean_rounds: if tally.successes == 0 { 0.0 } else { tally.rounds_on_success as f64 / tally.successes as f64 },
        per_round: tally.per_round,
        attempts: tally.attempts,
        attempt_successes: tally.successes,
        attempt_frequency: q,
        attempt_std_error: (q * (1.0 - q) / att).sqrt(),
        closed_form: cfg.closed_form(),
        state_checks: tally.checks,
        max_state_error: tally.max_err,
    })
}

/// Trace distance between the normalized success output and f(U)ρf(U)†.
fn success_error(call: &SingleCall, u: &CMatrix, p: f64) -> Result<f64> {
    let Some((s, spec)) = &call.protocol else {
        return Ok(0.0);
    };
    let out = apply_supermap(s, u, 1)?.scale(c(1.0 / p));
    out.trace_distance(&spec.target_output(u)?)
}

/// k minus the mean number of attempts used by successful trials.
pub fn rounds_saved(stats: &RusStats) -> f64 {
    if stats.successes == 0 {
        return 0.0;
    }
    (stats.k as f64 - stats.mean_rounds).max(0.0)
}

/// Choi operator of ρ ↦ λρ + (1 − λ)Tr(ρ)1/d on (I, O).
pub fn depolarizing(d: usize, lambda: f64) -> Result<LabeledOperator> {
    let ws = vec![Wire::new("I", d), Wire::new("O", d)];
    let phi = crate::tensor::choi_identity(d, "I", "O")?;
    let noise = LabeledOperator::identity(ws)?.scale(C64::new((1.0 - lambda) / d as f64, 0.0));
    phi.scale_re(lambda).add(&noise)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn born_probability_matches_link() {
        let mut rng = trial_rng(3, 0);
        for d in [2, 3] {
            let cfg = RusConfig::pure(d, 1, 1, 0);
            let call = single_call(&cfg).unwrap();
            let u = haar_unitary(d, &mut rng).unwrap();
            let p = born_unitary(&call.effect, &u);
            let tr = apply_supermap(&call.protocol.as_ref().unwrap().0, &u, 1).unwrap().trace().re;
            assert!((p - tr).abs() < 1e-12);
            assert!((p - 1.0 / d as f64).abs() < 1e-12);
            assert!(success_error(&call, &u, p).unwrap() < 1e-10);
        }
    }

    #[test]
    fn streams_are_independent_of_order() {
        let a: f64 = trial_rng(5, 17).random();
        let _: f64 = trial_rng(5, 3).random();
        let b: f64 = trial_rng(5, 17).random();
        assert_eq!(a, b);
        assert_ne!(a, trial_rng(5, 18).random::<f64>());
    }

    #[test]
    fn degenerate_dimension_always_succeeds() {
        let s = simulate(&RusConfig::pure(1, 1, 200, 1)).unwrap();
        assert_eq!(s.p_hat, 1.0);
        assert_eq!(rounds_saved(&s), 0.0);
    }
}
