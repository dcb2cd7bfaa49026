//! Command-line surface. `run` never exits the process; it returns the exit code.

use crate::error::Error;
use crate::protocols::{golden, mixed_state_protocol, visibility_threshold, MixedOutcome, ProtocolResult, SCHEMA};
use crate::rus::{self, ChannelModel, RusConfig};
use crate::sdp::{
    golden_manifest, reproduce_table, solve_instance, Formulation, Quantity, TableInstance, TableOptions, TableRow,
    Tolerances,
};
use crate::task::{InputState, Mode, ProtocolSpec, Strategy, Target};
use crate::tensor::{haar_unitary, CVector, C64};
use crate::validity::{spanning_set, verify_defining_equation, verify_protocol, VerificationReport};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Pretty,
}

#[derive(Debug, Parser)]
#[command(name = "hoqo", version, about = "Higher-order quantum operations on known input states")]
pub struct Cli {
    #[command(flatten)]
    pub config: CliConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CliConfig {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "HOQO_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "HOQO_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, env = "HOQO_CACHE_DIR", default_value = ".hoqo-cache")]
    pub cache_dir: PathBuf,
    /// Skip the result cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
}

impl CliConfig {
    fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(v) = self.tol {
            t.primal = v;
            t.dual = v;
            t.gap = v;
        }
        if let Some(m) = self.max_iter {
            t.max_iter = m;
        }
        t
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or verify closed-form protocols.
    #[command(subcommand)]
    Protocol(ProtocolCmd),
    /// Reproduce the numerical tables.
    #[command(subcommand)]
    Table(TableCmd),
    /// Solve one program.
    #[command(subcommand)]
    Sdp(SdpCmd),
    /// Repeat-until-success simulation.
    #[command(subcommand)]
    Rus(RusCmd),
    /// Size of a spanning set for |U⟩⟩⟨⟨U|^{⊗k}.
    Span {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Visibility thresholds with feasibility witnesses.
    Thresholds {
        #[arg(long)]
        f: Target,
        #[arg(long, default_value_t = 2)]
        d_min: usize,
        #[arg(long, default_value_t = 5)]
        d_max: usize,
    },
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    #[arg(long)]
    pub f: Target,
    #[arg(long)]
    pub mode: Mode,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value = "par")]
    pub strategy: Strategy,
    /// Amplitudes `re` or `re:im`, comma separated (normalized automatically). Default |0⟩.
    #[arg(long, conflicts_with = "schmidt")]
    pub psi: Option<String>,
    /// Schmidt weights of a bipartite input.
    #[arg(long, value_delimiter = ',')]
    pub schmidt: Option<Vec<f64>>,
    /// Visibility of a mixed input η|ψ⟩⟨ψ| + (1 − η)1/d.
    #[arg(long, conflicts_with = "schmidt")]
    pub eta: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ProtocolCmd {
    Build {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Write the protocol as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Verify {
        input: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum TableCmd {
    Reproduce {
        #[arg(long)]
        task: String,
        #[arg(long)]
        quantity: String,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        strategy: Option<Vec<Strategy>>,
        #[arg(long, default_value = "auto")]
        formulation: Formulation,
    },
}

#[derive(Debug, Subcommand)]
pub enum SdpCmd {
    Solve {
        /// e.g. trans-p-k2-d2-par
        #[arg(long)]
        preset: String,
        #[arg(long, default_value = "auto")]
        formulation: Formulation,
    },
}

#[derive(Debug, Subcommand)]
pub enum RusCmd {
    Run {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, value_delimiter = ',')]
        schmidt: Option<Vec<f64>>,
        /// Use the fixed depolarizing channel with this λ instead of Haar unitaries.
        #[arg(long)]
        depolarizing: Option<f64>,
        #[arg(long, default_value = "trans")]
        target: Target,
        /// Per-round histogram as CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
}

/// A failure with its exit code.
struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::UnknownLabel(_) | Error::Dimension(_) | Error::Unsupported(_) => EXIT_USAGE,
            Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_FAILED,
        };
        Fail(code, e.to_string())
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail(EXIT_FAILED, e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail(EXIT_FAILED, e.to_string())
    }
}

impl From<csv::Error> for Fail {
    fn from(e: csv::Error) -> Self {
        Fail(EXIT_FAILED, e.to_string())
    }
}

type Out<'a> = &'a mut dyn Write;

pub fn run<I, T>(args: I, out: Out, err: Out) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    if cli.config.threads > 0 {
        // only the first call in a process takes effect
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.config.threads).build_global();
    }
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn dispatch(cli: &Cli, out: Out, err: Out) -> Result<i32, Fail> {
    let cfg = &cli.config;
    match &cli.command {
        Command::Protocol(ProtocolCmd::Build { spec, samples, out: path }) => protocol_build(cfg, spec, *samples, path, out),
        Command::Protocol(ProtocolCmd::Verify { input, samples }) => protocol_verify(cfg, input, *samples, out),
        Command::Table(TableCmd::Reproduce { task, quantity, k, d, strategy, formulation }) => {
            table(cfg, task, quantity, k, d, strategy, *formulation, out, err)
        }
        Command::Sdp(SdpCmd::Solve { preset, formulation }) => sdp_solve(cfg, preset, *formulation, out),
        Command::Rus(RusCmd::Run { d, k, trials, schmidt, depolarizing, target, histogram }) => {
            rus_run(cfg, *d, *k, *trials, schmidt, *depolarizing, *target, histogram, out)
        }
        Command::Span { d, k } => span(cfg, *d, *k, out),
        Command::Thresholds { f, d_min, d_max } => thresholds(cfg, *f, *d_min, *d_max, out),
    }
}

fn parse_psi(text: &str) -> Result<CVector, Fail> {
    let mut v = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        let (re, im) = tok.split_once(':').unwrap_or((tok, "0"));
        let p = |s: &str| s.trim().parse::<f64>().map_err(|_| Fail(EXIT_USAGE, format!("bad amplitude `{tok}`")));
        v.push(C64::new(p(re)?, p(im)?));
    }
    let psi = CVector::from_vec(v);
    let n = psi.norm();
    if n == 0.0 {
        return Err(Fail(EXIT_USAGE, "state vector is zero".into()));
    }
    Ok(psi / C64::new(n, 0.0))
}

fn build_spec(a: &SpecArgs) -> Result<ProtocolSpec, Fail> {
    let psi = match &a.psi {
        Some(t) => parse_psi(t)?,
        None => InputState::basis(a.d, 0).psi().clone(),
    };
    let state = match (&a.schmidt, a.eta) {
        (Some(w), _) => InputState::schmidt(a.d, w)?,
        (None, Some(eta)) => InputState::Mixed { psi, eta },
        (None, None) => InputState::Pure { psi },
    };
    Ok(ProtocolSpec::new(a.f, a.mode, a.d, a.k, a.strategy, state)?)
}

fn emit_report(cfg: &CliConfig, out: Out, value: serde_json::Value, report: &VerificationReport) -> Result<(), Fail> {
    match cfg.format {
        Format::Pretty => {
            if let Some(v) = value.get("value") {
                writeln!(out, "value = {v}")?;
            }
            write!(out, "{}", report.render())?;
        }
        Format::Json | Format::Csv => {
            let mut v = value;
            v["checks"] = serde_json::to_value(&report.checks)?;
            v["overall"] = json!(report.overall);
            v["failures"] = json!(report.failures());
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
        }
    }
    Ok(())
}

fn protocol_build(cfg: &CliConfig, a: &SpecArgs, samples: usize, path: &Option<PathBuf>, out: Out) -> Result<i32, Fail> {
    let spec = build_spec(a)?;
    let r = golden(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let report = verify_protocol(&r, samples, &mut rng)?;
    if let Some(p) = path {
        r.save(p)?;
    }
    let v = json!({
        "schema": SCHEMA,
        "spec": {"f": spec.f, "mode": spec.mode, "d": spec.d, "k": spec.k, "strategy": spec.strategy},
        "value": r.value,
        "empty": r.supermap.frobenius_norm() == 0.0,
    });
    emit_report(cfg, out, v, &report)?;
    Ok(if report.overall { EXIT_OK } else { EXIT_FAILED })
}

fn protocol_verify(cfg: &CliConfig, input: &PathBuf, samples: usize, out: Out) -> Result<i32, Fail> {
    let r = ProtocolResult::load(input).map_err(|e| Fail(EXIT_FAILED, format!("{}: {e}", input.display())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let report = verify_protocol(&r, samples, &mut rng)?;
    let v = json!({"schema": SCHEMA, "input": input, "value": r.value});
    emit_report(cfg, out, v, &report)?;
    Ok(if report.overall { EXIT_OK } else { EXIT_FAILED })
}

fn options(cfg: &CliConfig, formulation: Formulation) -> TableOptions {
    TableOptions {
        tol: cfg.tolerances(),
        seed: cfg.seed,
        formulation,
        cache_dir: if cfg.no_cache { None } else { Some(cfg.cache_dir.clone()) },
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    task: &'a str,
    quantity: String,
    k: usize,
    d: usize,
    strategy: &'a str,
    value: String,
    reference: String,
    diff: String,
    source: String,
    method: &'a str,
    converged: bool,
}

fn csv_row(r: &TableRow) -> CsvRow<'_> {
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    CsvRow {
        task: r.instance.task.name(),
        quantity: r.instance.quantity.to_string(),
        k: r.instance.k,
        d: r.instance.d,
        strategy: r.instance.strategy.short(),
        value: format!("{:.6}", r.value),
        reference: opt(r.reference),
        diff: r.diff.map(|v| format!("{v:+.2e}")).unwrap_or_default(),
        source: r.source.clone().unwrap_or_default(),
        method: &r.method,
        converged: r.converged,
    }
}

#[allow(clippy::too_many_arguments)]
fn table(
    cfg: &CliConfig,
    task: &str,
    quantity: &str,
    ks: &Option<Vec<usize>>,
    ds: &Option<Vec<usize>>,
    strategies: &Option<Vec<Strategy>>,
    formulation: Formulation,
    out: Out,
    err: Out,
) -> Result<i32, Fail> {
    let task: Target = task.parse()?;
    if !matches!(task, Target::Trans | Target::Inv) {
        return Err(Fail(EXIT_USAGE, format!("tables exist for trans and inv, not `{task}`")));
    }
    let quantity: Quantity = quantity.parse()?;
    let instances: Vec<TableInstance> = golden_manifest()
        .iter()
        .filter(|e| e.source == "reference-table" && e.task == task && e.quantity == quantity)
        .filter(|e| ks.as_ref().is_none_or(|v| v.contains(&e.k)))
        .filter(|e| ds.as_ref().is_none_or(|v| v.contains(&e.d)))
        .filter(|e| strategies.as_ref().is_none_or(|v| v.contains(&e.strategy)))
        .map(|e| TableInstance::new(e.task, e.quantity, e.k, e.d, e.strategy))
        .collect();
    if instances.is_empty() {
        return Err(Fail(EXIT_USAGE, "no table entries match the requested ranges".into()));
    }
    let opts = options(cfg, formulation);
    use rayon::prelude::*;
    let rows: Vec<Result<TableRow, Error>> = instances.par_iter().map(|i| reproduce_table(i, &opts)).collect();
    let mut good = Vec::new();
    for r in rows {
        good.push(r?);
    }
    for r in &good {
        let _ = writeln!(
            err,
            "{}: {:.6} ({}{})",
            r.instance,
            r.value,
            r.method,
            if r.cached { ", cached" } else { "" }
        );
    }
    match cfg.format {
        Format::Csv | Format::Pretty => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &good {
                w.serialize(csv_row(r))?;
            }
            let bytes = w.into_inner().map_err(|e| Fail(EXIT_FAILED, e.to_string()))?;
            out.write_all(&bytes)?;
        }
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&json!({"schema": SCHEMA, "rows": good}))?)?,
    }
    if good.iter().any(|r| !r.converged) {
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(if good.iter().all(|r| r.matches != Some(false)) { EXIT_OK } else { EXIT_FAILED })
}

fn sdp_solve(cfg: &CliConfig, preset: &str, formulation: Formulation, out: Out) -> Result<i32, Fail> {
    let inst: TableInstance = preset.parse()?;
    let (row, _) = solve_instance(&inst, &options(cfg, formulation))?;
    let v = json!({
        "schema": SCHEMA,
        "instance": row.instance,
        "label": inst.label(),
        "value": row.value,
        "method": row.method,
        "reference": row.reference,
        "diff": row.diff,
        "residuals": row.residuals,
        "iterations": row.iterations,
        "seconds": row.seconds,
        "converged": row.converged,
    });
    match cfg.format {
        Format::Pretty => writeln!(out, "{} = {:.6} ({} iterations, {:.2}s)", inst, row.value, row.iterations, row.seconds)?,
        _ => writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?,
    }
    Ok(if row.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[allow(clippy::too_many_arguments)]
fn rus_run(
    cfg: &CliConfig,
    d: usize,
    k: usize,
    trials: u64,
    schmidt: &Option<Vec<f64>>,
    depolarizing: Option<f64>,
    target: Target,
    histogram: &Option<PathBuf>,
    out: Out,
) -> Result<i32, Fail> {
    let mut c = RusConfig::pure(d, k, trials, cfg.seed);
    c.target = target;
    if let Some(w) = schmidt {
        c.input = InputState::schmidt(d, w)?;
    }
    if let Some(l) = depolarizing {
        c.channel = ChannelModel::Fixed(rus::depolarizing(d, l)?);
    }
    let s = rus::simulate(&c)?;
    if let Some(p) = histogram {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["round", "successes"])?;
        for (r, n) in s.per_round.iter().enumerate() {
            w.write_record([(r + 1).to_string(), n.to_string()])?;
        }
        w.flush()?;
    }
    let mut v = serde_json::to_value(&s)?;
    v["schema"] = json!(SCHEMA);
    v["rounds_saved"] = json!(rus::rounds_saved(&s));
    match cfg.format {
        Format::Pretty => writeln!(
            out,
            "p̂ = {:.5} ± {:.5} (closed form {:.5}), mean rounds {:.3}",
            s.p_hat, s.std_error, s.closed_form, s.mean_rounds
        )?,
        _ => writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?,
    }
    Ok(EXIT_OK)
}

fn span(cfg: &CliConfig, d: usize, k: usize, out: Out) -> Result<i32, Fail> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = spanning_set(d, k, &mut rng)?;
    let v = json!({"schema": SCHEMA, "d": d, "k": k, "rank": s.rank, "unitaries": s.unitaries.len()});
    match cfg.format {
        Format::Pretty => writeln!(out, "r({d},{k}) = {}", s.rank)?,
        _ => writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ThresholdRow {
    f: Target,
    d: usize,
    eta_star: f64,
    /// Max defining-equation residual at η*.
    witness_residual: f64,
    witness_ok: bool,
    /// η* + 0.05, when still ≤ 1.
    above: Option<f64>,
    /// Trace distance from the exact target at η* + 0.05.
    above_distance: Option<f64>,
}

fn thresholds(cfg: &CliConfig, f: Target, d_min: usize, d_max: usize, out: Out) -> Result<i32, Fail> {
    if d_min < 2 || d_max < d_min {
        return Err(Fail(EXIT_USAGE, "need 2 ≤ d-min ≤ d-max".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for d in d_min..=d_max {
        let psi = haar_unitary(d, &mut rng)?.column(0).into_owned();
        let eta = visibility_threshold(f, d);
        let MixedOutcome::Exact(r) = mixed_state_protocol(f, d, &psi, eta)? else {
            return Err(Fail(EXIT_FAILED, format!("no exact protocol at the threshold for d={d}")));
        };
        let rep = verify_defining_equation(&r.supermap, &r.spec, Some(1.0), 20, &mut rng)?;
        let res = rep.get("defining-eq-haar").map(|c| c.residual).unwrap_or(f64::NAN);
        let (above, dist) = if eta + 0.05 <= 1.0 {
            match mixed_state_protocol(f, d, &psi, eta + 0.05)? {
                MixedOutcome::Infeasible { best, .. } => {
                    let spec = best.spec.with_state(InputState::Mixed { psi: psi.clone(), eta: eta + 0.05 })?;
                    let u = haar_unitary(d, &mut rng)?;
                    let dist = best.apply(&u)?.trace_distance(&spec.target_output(&u)?)?;
                    (Some(eta + 0.05), Some(dist))
                }
                MixedOutcome::Exact(_) => (Some(eta + 0.05), Some(0.0)),
            }
        } else {
            (None, None)
        };
        rows.push(ThresholdRow {
            f,
            d,
            eta_star: eta,
            witness_residual: res,
            witness_ok: res <= 1e-9,
            above,
            above_distance: dist,
        });
    }
    match cfg.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&json!({"schema": SCHEMA, "rows": rows}))?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["f", "d", "eta_star", "witness_residual", "above_distance"])?;
            for r in &rows {
                w.write_record([
                    r.f.name().to_string(),
                    r.d.to_string(),
                    format!("{:.6}", r.eta_star),
                    format!("{:.2e}", r.witness_residual),
                    r.above_distance.map(|x| format!("{x:.6}")).unwrap_or_default(),
                ])?;
            }
            out.write_all(&w.into_inner().map_err(|e| Fail(EXIT_FAILED, e.to_string()))?)?;
        }
        Format::Pretty => {
            for r in &rows {
                writeln!(out, "{} d={}: η* = {:.4}", r.f, r.d, r.eta_star)?;
            }
        }
    }
    Ok(if rows.iter().all(|r| r.witness_ok) { EXIT_OK } else { EXIT_FAILED })
}
