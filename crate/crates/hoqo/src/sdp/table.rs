use super::build::{build_deterministic, build_probabilistic, reference_spec, resolve_formulation, Formulation};
use super::{solve, Residuals, SdpProblem, SdpSolution, Tolerances};
use crate::error::{Error, Result};
use crate::task::{InputState, Mode, ProtocolSpec, Strategy, Target};
use crate::twirl::performance_operator;
use crate::validity::spanning_set;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

/// Bumped whenever solver output for a fixed instance could change.
pub const CACHE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// Success probability.
    #[serde(rename = "p")]
    P,
    /// Average fidelity.
    #[serde(rename = "F")]
    F,
}

impl Quantity {
    pub fn mode(self) -> Mode {
        match self {
            Quantity::P => Mode::Prob,
            Quantity::F => Mode::Det,
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" | "P" | "prob" => Ok(Quantity::P),
            "F" | "f" | "fid" | "fidelity" | "det" => Ok(Quantity::F),
            _ => Err(Error::InvalidInput(format!("unknown quantity `{s}` (use p or F)"))),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::P => "p",
            Quantity::F => "F",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableInstance {
    pub task: Target,
    pub quantity: Quantity,
    pub k: usize,
    pub d: usize,
    pub strategy: Strategy,
}

impl TableInstance {
    pub fn new(task: Target, quantity: Quantity, k: usize, d: usize, strategy: Strategy) -> Self {
        TableInstance { task, quantity, k, d, strategy }
    }

    /// The instance posed for the reference input |0⟩.
    pub fn spec(&self) -> Result<ProtocolSpec> {
        let spec = ProtocolSpec::new(
            self.task,
            self.quantity.mode(),
            self.d,
            self.k,
            self.strategy,
            InputState::basis(self.d, 0),
        )?;
        reference_spec(&spec)
    }

    /// e.g. `trans-p-k2-d2-par`.
    pub fn label(&self) -> String {
        format!("{}-{}-k{}-d{}-{}", self.task.name(), self.quantity, self.k, self.d, self.strategy.short())
    }
}

impl fmt::Display for TableInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for TableInstance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        let bad = || Error::InvalidInput(format!("preset `{s}` is not of the form trans-p-k2-d2-par"));
        if parts.len() != 5 {
            return Err(bad());
        }
        let num = |p: &str, pre: char| -> Result<usize> {
            p.strip_prefix(pre).and_then(|v| v.parse().ok()).ok_or_else(bad)
        };
        Ok(TableInstance {
            task: parts[0].parse()?,
            quantity: parts[1].parse()?,
            k: num(parts[2], 'k')?,
            d: num(parts[3], 'd')?,
            strategy: parts[4].parse()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenEntry {
    pub task: Target,
    pub quantity: Quantity,
    pub k: usize,
    pub d: usize,
    pub strategy: Strategy,
    pub value: f64,
    /// "reference-table" or "closed-form".
    pub source: String,
    pub tolerance: f64,
}

#[derive(Deserialize)]
struct Manifest {
    schema: u32,
    entries: Vec<GoldenEntry>,
}

const MANIFEST: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/golden_table.json"));

pub fn golden_manifest() -> &'static [GoldenEntry] {
    static CELL: OnceLock<Vec<GoldenEntry>> = OnceLock::new();
    CELL.get_or_init(|| {
        let m: Manifest = serde_json::from_str(MANIFEST).expect("embedded golden manifest parses");
        assert_eq!(m.schema, 1, "golden manifest schema");
        m.entries
    })
}

pub fn lookup_golden(inst: &TableInstance) -> Option<&'static GoldenEntry> {
    golden_manifest().iter().find(|e| {
        e.task == inst.task && e.quantity == inst.quantity && e.k == inst.k && e.d == inst.d && e.strategy == inst.strategy
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableOptions {
    pub tol: Tolerances,
    /// Seeds the spanning-set sampler.
    pub seed: u64,
    pub formulation: Formulation,
    pub cache_dir: Option<PathBuf>,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { tol: Tolerances::default(), seed: 0, formulation: Formulation::Auto, cache_dir: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub schema: u32,
    pub instance: TableInstance,
    pub value: f64,
    /// "spanning", "covariant", "deterministic", or "sandwich" (GEN ≥ SEQ = 1).
    pub method: String,
    pub reference: Option<f64>,
    pub source: Option<String>,
    pub tolerance: Option<f64>,
    pub diff: Option<f64>,
    pub matches: Option<bool>,
    pub residuals: Residuals,
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
    #[serde(skip)]
    pub cached: bool,
}

impl TableRow {
    fn new(inst: TableInstance, method: String, sol: &SdpSolution) -> Self {
        let g = lookup_golden(&inst);
        let diff = g.map(|g| sol.value - g.value);
        TableRow {
            schema: crate::protocols::SCHEMA,
            instance: inst,
            value: sol.value,
            method,
            reference: g.map(|g| g.value),
            source: g.map(|g| g.source.clone()),
            tolerance: g.map(|g| g.tolerance),
            diff,
            matches: g.map(|g| (sol.value - g.value).abs() <= g.tolerance),
            residuals: sol.residuals,
            iterations: sol.iterations,
            seconds: sol.seconds,
            converged: sol.converged,
            cached: false,
        }
    }
}

/// Builds the program for an instance (spanning set drawn from `opts.seed` when needed).
pub fn build_instance(inst: &TableInstance, opts: &TableOptions) -> Result<SdpProblem> {
    let spec = inst.spec()?;
    match inst.quantity {
        Quantity::P => {
            let form = resolve_formulation(inst.d, inst.k, opts.formulation);
            let ss = if form == Formulation::Spanning {
                Some(spanning_set(inst.d, inst.k, &mut ChaCha8Rng::seed_from_u64(opts.seed))?)
            } else {
                None
            };
            build_probabilistic(&spec, ss.as_ref(), form)
        }
        Quantity::F => build_deterministic(&spec, &performance_operator(&spec)?),
    }
}

fn method_of(problem: &SdpProblem) -> String {
    serde_json::to_value(problem.kind)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// Builds and solves one instance without touching the cache.
pub fn solve_instance(inst: &TableInstance, opts: &TableOptions) -> Result<(TableRow, SdpSolution)> {
    if inst.strategy == Strategy::General && inst.k == 3 {
        let seq = TableInstance { strategy: Strategy::Sequential, ..*inst };
        let (row, sol) = solve_instance(&seq, opts)?;
        // SEQ ⊆ GEN and every value is at most 1
        if !sol.converged || sol.value < 1.0 - 10.0 * opts.tol.primal.max(opts.tol.gap) {
            return Err(Error::Unsupported(format!(
                "general k=3 is only certified when the sequential optimum is 1 (got {:.6})",
                row.value
            )));
        }
        return Ok((TableRow::new(*inst, "sandwich".into(), &sol), sol));
    }
    let problem = build_instance(inst, opts)?;
    let sol = solve(&problem, &opts.tol)?;
    Ok((TableRow::new(*inst, method_of(&problem), &sol), sol))
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    version: u32,
    instance: &'a TableInstance,
    seed: u64,
    formulation: Formulation,
    tol: &'a Tolerances,
}

/// Hex sha-256 of the canonical JSON of everything that determines the result.
pub fn cache_key(inst: &TableInstance, opts: &TableOptions) -> String {
    let form = match inst.quantity {
        Quantity::P => resolve_formulation(inst.d, inst.k, opts.formulation),
        Quantity::F => Formulation::Covariant,
    };
    let km = KeyMaterial { version: CACHE_VERSION, instance: inst, seed: opts.seed, formulation: form, tol: &opts.tol };
    let bytes = serde_json::to_vec(&km).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().ok_or_else(|| Error::InvalidInput("cache path has no parent".into()))?;
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("entry"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Solves (or loads from cache) one table entry and compares it with the embedded manifest.
/// Only trans and inv entries exist in the tables.
pub fn reproduce_table(inst: &TableInstance, opts: &TableOptions) -> Result<TableRow> {
    if !matches!(inst.task, Target::Trans | Target::Inv) {
        return Err(Error::InvalidInput(format!("tables cover trans and inv, not `{}`", inst.task)));
    }
    let path = opts.cache_dir.as_ref().map(|d| d.join(format!("{}.json", cache_key(inst, opts))));
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            if let Ok(mut row) = serde_json::from_str::<TableRow>(&text) {
                if row.instance == *inst {
                    row.cached = true;
                    return Ok(row);
                }
            }
        }
    }
    let (row, _) = solve_instance(inst, opts)?;
    if let (Some(p), true) = (&path, row.converged) {
        write_atomic(p, serde_json::to_string_pretty(&row)?.as_bytes())?;
    }
    Ok(row)
}
