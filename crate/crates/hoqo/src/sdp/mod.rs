//! Real semidefinite programs over block variables and a first-order ADMM solver.
//!
//! A problem is `max ⟨c, x⟩` over blocks `x = (X_1, …, X_n)` subject to
//! `x ∈ L` (a structural subspace given by an orthogonal projector),
//! a handful of dense equality rows `⟨a_i, x⟩ = b_i`, and a cone per block.

mod build;
mod table;

pub use build::{
    build_deterministic, build_probabilistic, class_projector, face_basis, resolve_formulation, ClassProjector,
    Formulation, ProblemKind, reference_spec, SPANNING_MAX_DIM,
};
pub use table::{
    build_instance, cache_key, golden_manifest, lookup_golden, reproduce_table, solve_instance, GoldenEntry, Quantity, TableInstance, TableOptions,
    TableRow, CACHE_VERSION,
};

use crate::error::{Error, Result};
use crate::task::ProtocolSpec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

pub type Blocks = Vec<DMatrix<f64>>;

#[derive(Clone, Debug)]
pub enum Cone {
    Psd,
    /// Positive operators supported on the column span of an orthonormal W.
    Face(DMatrix<f64>),
    /// Unconstrained (dual slack must vanish here).
    Free,
}

#[derive(Clone, Debug)]
pub struct Block {
    pub name: String,
    pub dim: usize,
    pub cone: Cone,
}

impl Block {
    pub fn new(name: impl Into<String>, dim: usize, cone: Cone) -> Self {
        Block { name: name.into(), dim, cone }
    }
}

/// Orthogonal projector onto the structural subspace L.
pub trait Subspace: Send + Sync {
    fn project(&self, x: &[DMatrix<f64>]) -> Blocks;
}

/// L = everything.
pub struct Whole;

impl Subspace for Whole {
    fn project(&self, x: &[DMatrix<f64>]) -> Blocks {
        x.to_vec()
    }
}

#[derive(Clone, Debug)]
pub struct Equality {
    pub coeffs: Blocks,
    pub rhs: f64,
}

pub struct SdpProblem {
    pub label: String,
    pub blocks: Vec<Block>,
    /// Maximized.
    pub objective: Blocks,
    pub equalities: Vec<Equality>,
    pub metadata: Option<ProtocolSpec>,
    pub kind: ProblemKind,
    subspace: Arc<dyn Subspace>,
    rows: Vec<Blocks>,
    gram_pinv: DMatrix<f64>,
}

impl std::fmt::Debug for SdpProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdpProblem")
            .field("label", &self.label)
            .field("blocks", &self.blocks.iter().map(|b| (&b.name, b.dim)).collect::<Vec<_>>())
            .field("equalities", &self.equalities.len())
            .field("kind", &self.kind)
            .finish()
    }
}

pub fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

pub fn norm(a: &[DMatrix<f64>]) -> f64 {
    inner(a, a).sqrt()
}

fn axpy(y: &mut [DMatrix<f64>], alpha: f64, x: &[DMatrix<f64>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * alpha;
    }
}

fn lin(a: f64, x: &[DMatrix<f64>], b: f64, y: &[DMatrix<f64>]) -> Blocks {
    x.iter().zip(y).map(|(p, q)| p * a + q * b).collect()
}

fn sym(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn project_psd(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    if n == 0 {
        return x.clone();
    }
    let e = crate::tensor::robust_eigen(&sym(x));
    let keep: Vec<usize> = (0..n).filter(|&i| e.eigenvalues[i] > 0.0).collect();
    if keep.is_empty() {
        return DMatrix::zeros(n, n);
    }
    let v = DMatrix::from_fn(n, keep.len(), |r, c| e.eigenvectors[(r, keep[c])] * e.eigenvalues[keep[c]].sqrt());
    &v * v.transpose()
}

fn project_face(x: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    if w.ncols() == 0 {
        return DMatrix::zeros(x.nrows(), x.ncols());
    }
    let inner = w.transpose() * x * w;
    w * project_psd(&inner) * w.transpose()
}

/// Nearest Z with WᵀZW ⪰ 0: only the compression to the face is touched.
fn project_face_dual(x: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let x = sym(x);
    if w.ncols() == 0 {
        return x;
    }
    let inner = w.transpose() * &x * w;
    let fix = project_psd(&inner) - sym(&inner);
    x + w * fix * w.transpose()
}

impl SdpProblem {
    pub fn new(
        label: impl Into<String>,
        blocks: Vec<Block>,
        objective: Blocks,
        subspace: Arc<dyn Subspace>,
        equalities: Vec<Equality>,
        kind: ProblemKind,
        metadata: Option<ProtocolSpec>,
    ) -> Result<Self> {
        let check = |what: &str, x: &[DMatrix<f64>]| -> Result<()> {
            if x.len() != blocks.len() {
                return Err(Error::Dimension(format!("{what}: {} blocks, problem has {}", x.len(), blocks.len())));
            }
            for (m, b) in x.iter().zip(&blocks) {
                if m.nrows() != b.dim || m.ncols() != b.dim {
                    return Err(Error::Dimension(format!(
                        "{what}: block `{}` is {}x{}, expected side {}",
                        b.name,
                        m.nrows(),
                        m.ncols(),
                        b.dim
                    )));
                }
            }
            Ok(())
        };
        check("objective", &objective)?;
        for (i, e) in equalities.iter().enumerate() {
            check(&format!("equality {i}"), &e.coeffs)?;
        }
        for b in &blocks {
            if let Cone::Face(w) = &b.cone {
                if w.nrows() != b.dim {
                    return Err(Error::Dimension(format!("face basis of `{}` has {} rows", b.name, w.nrows())));
                }
            }
        }
        let rows: Vec<Blocks> = equalities.iter().map(|e| subspace.project(&e.coeffs)).collect();
        let m = rows.len();
        let mut gram = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let g = inner(&rows[i], &rows[j]);
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        let gram_pinv = if m == 0 {
            gram
        } else {
            let scale = gram.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            gram.pseudo_inverse(1e-10 * scale).map_err(|e| Error::Numerical(e.to_string()))?
        };
        Ok(SdpProblem {
            label: label.into(),
            blocks,
            objective,
            equalities,
            metadata,
            kind,
            subspace,
            rows,
            gram_pinv,
        })
    }

    pub fn zeros(&self) -> Blocks {
        self.blocks.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect()
    }

    fn project_with(&self, x: &[DMatrix<f64>], homogeneous: bool) -> Blocks {
        let mut y = self.subspace.project(x);
        if self.rows.is_empty() {
            return y;
        }
        let r = nalgebra::DVector::from_iterator(
            self.rows.len(),
            self.rows
                .iter()
                .zip(&self.equalities)
                .map(|(a, e)| inner(a, x) - if homogeneous { 0.0 } else { e.rhs }),
        );
        let lam = &self.gram_pinv * r;
        for (a, l) in self.rows.iter().zip(lam.iter()) {
            if *l != 0.0 {
                axpy(&mut y, -l, a);
            }
        }
        y
    }

    /// Orthogonal projection onto the affine feasible set.
    pub fn project_affine(&self, x: &[DMatrix<f64>]) -> Blocks {
        self.project_with(x, false)
    }

    /// Orthogonal projection onto the linear part of the feasible set.
    pub fn project_linear(&self, x: &[DMatrix<f64>]) -> Blocks {
        self.project_with(x, true)
    }

    pub fn project_cone(&self, x: &[DMatrix<f64>]) -> Blocks {
        x.iter()
            .zip(&self.blocks)
            .map(|(m, b)| match &b.cone {
                Cone::Psd => project_psd(m),
                Cone::Face(w) => project_face(m, w),
                Cone::Free => m.clone(),
            })
            .collect()
    }

    /// Projection onto the dual-feasible slacks used for certificates (zero on free blocks).
    fn project_dual_cone(&self, x: &[DMatrix<f64>]) -> Blocks {
        x.iter()
            .zip(&self.blocks)
            .map(|(m, b)| match &b.cone {
                Cone::Psd => project_psd(m),
                Cone::Face(w) => project_face_dual(m, w),
                Cone::Free => DMatrix::zeros(b.dim, b.dim),
            })
            .collect()
    }

    pub fn objective_value(&self, x: &[DMatrix<f64>]) -> f64 {
        inner(&self.objective, x)
    }

    /// Distance to the affine feasible set.
    pub fn equality_residual(&self, x: &[DMatrix<f64>]) -> f64 {
        let p = self.project_affine(x);
        norm(&lin(1.0, x, -1.0, &p))
    }

    /// Distance to the cone.
    pub fn cone_residual(&self, x: &[DMatrix<f64>]) -> f64 {
        let p = self.project_cone(x);
        norm(&lin(1.0, x, -1.0, &p))
    }

    /// A strictly interior-ish starting point: identity spread over the last PSD block.
    fn start(&self) -> Blocks {
        let mut z = self.zeros();
        let total: f64 = self.equalities.first().map(|e| e.rhs).unwrap_or(1.0);
        if let Some(i) = self.blocks.iter().rposition(|b| matches!(b.cone, Cone::Psd)) {
            let n = self.blocks[i].dim;
            z[i] = DMatrix::identity(n, n) * (total / n as f64);
        }
        z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { primal: 1e-6, dual: 1e-6, gap: 1e-6, max_iter: 200_000 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.primal > 0.0 && self.dual > 0.0 && self.gap > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("iteration cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub value: f64,
    pub blocks: Blocks,
    pub residuals: Residuals,
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
}

impl SdpSolution {
    /// Turns a non-converged run into an error carrying its residuals.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                primal: self.residuals.primal,
                dual: self.residuals.dual,
                gap: self.residuals.gap,
            })
        }
    }
}

const ALPHA: f64 = 1.6;
const CHECK_EVERY: usize = 25;
const RHO_BALANCE: f64 = 5.0;

/// ADMM on `min ⟨−c, x⟩` with x in the affine set and z in the cone, x = z.
pub fn solve(problem: &SdpProblem, tol: &Tolerances) -> Result<SdpSolution> {
    tol.validate()?;
    let start = Instant::now();
    let c: Blocks = problem.objective.iter().map(|m| -m).collect();
    let mut rho = 1.0;
    let mut z = problem.start();
    let mut u = problem.zeros();
    let mut x = problem.project_affine(&z);
    let mut residuals = Residuals { primal: f64::INFINITY, dual: f64::INFINITY, gap: f64::INFINITY };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < tol.max_iter {
        iterations += 1;
        let mut arg = lin(1.0, &z, -1.0, &u);
        axpy(&mut arg, -1.0 / rho, &c);
        x = problem.project_affine(&arg);
        let xh = lin(ALPHA, &x, 1.0 - ALPHA, &z);
        let z_old = std::mem::replace(&mut z, problem.project_cone(&lin(1.0, &xh, 1.0, &u)));
        axpy(&mut u, 1.0, &xh);
        axpy(&mut u, -1.0, &z);

        if iterations % CHECK_EVERY != 0 && iterations != tol.max_iter {
            continue;
        }
        let rp = norm(&lin(1.0, &x, -1.0, &z));
        let rd = rho * norm(&lin(1.0, &z, -1.0, &z_old));
        residuals.primal = rp;
        if rp <= tol.primal || iterations == tol.max_iter {
            let (dual, gap) = certificate(problem, &c, &u, rho, &x);
            residuals.dual = dual;
            residuals.gap = gap;
            if rp <= tol.primal && dual <= tol.dual && gap <= tol.gap {
                converged = true;
                break;
            }
        }
        if rp > RHO_BALANCE * rd {
            rho *= 2.0;
            u.iter_mut().for_each(|m| *m *= 0.5);
        } else if rd > RHO_BALANCE * rp {
            rho *= 0.5;
            u.iter_mut().for_each(|m| *m *= 2.0);
        }
    }
    Ok(SdpSolution {
        value: problem.objective_value(&x),
        blocks: x,
        residuals,
        iterations,
        seconds: start.elapsed().as_secs_f64(),
        converged,
    })
}

/// Dual slack y = Π_K(−ρu); returns (‖Π_lin(c − y)‖, |⟨y, x⟩|).
fn certificate(problem: &SdpProblem, c: &[DMatrix<f64>], u: &[DMatrix<f64>], rho: f64, x: &[DMatrix<f64>]) -> (f64, f64) {
    let neg: Blocks = u.iter().map(|m| m * -rho).collect();
    let y = problem.project_dual_cone(&neg);
    let r = problem.project_linear(&lin(1.0, c, -1.0, &y));
    (norm(&r), inner(&y, x).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_trace_problem() {
        // max Tr X s.t. X ⪰ 0, X11 + X22 = 1
        let blocks = vec![Block::new("X", 2, Cone::Psd)];
        let obj = vec![DMatrix::identity(2, 2)];
        let eq = vec![Equality { coeffs: vec![DMatrix::identity(2, 2)], rhs: 1.0 }];
        let p = SdpProblem::new("tiny", blocks, obj, Arc::new(Whole), eq, ProblemKind::Custom, None).unwrap();
        let s = solve(&p, &Tolerances::default()).unwrap();
        assert!(s.converged);
        assert!((s.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn max_eigenvalue_problem() {
        // max ⟨C, X⟩ with Tr X = 1 is λ_max(C)
        let cmat = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 1.0]);
        let want = cmat.clone().symmetric_eigen().eigenvalues.max();
        let blocks = vec![Block::new("X", 3, Cone::Psd)];
        let eq = vec![Equality { coeffs: vec![DMatrix::identity(3, 3)], rhs: 1.0 }];
        let p = SdpProblem::new("eig", blocks, vec![cmat], Arc::new(Whole), eq, ProblemKind::Custom, None).unwrap();
        let s = solve(&p, &Tolerances::default()).unwrap();
        assert!(s.converged);
        assert!((s.value - want).abs() < 1e-5, "{} vs {want}", s.value);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let cmat = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.0]);
        let blocks = vec![Block::new("X", 2, Cone::Psd)];
        let eq = vec![Equality { coeffs: vec![DMatrix::identity(2, 2)], rhs: 1.0 }];
        let p = SdpProblem::new("cap", blocks, vec![cmat], Arc::new(Whole), eq, ProblemKind::Custom, None).unwrap();
        let tol = Tolerances { max_iter: 3, ..Default::default() };
        let s = solve(&p, &tol).unwrap();
        assert!(!s.converged);
        assert!(s.require_converged().is_err());
    }

    #[test]
    fn psd_projection_clips_negative_part() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let p = project_psd(&x);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12 && p[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn affine_projection_is_idempotent() {
        let blocks = vec![Block::new("X", 3, Cone::Psd)];
        let eq = vec![
            Equality { coeffs: vec![DMatrix::identity(3, 3)], rhs: 2.0 },
            Equality { coeffs: vec![DMatrix::from_diagonal_element(3, 3, 0.0).map(|_| 1.0)], rhs: 0.5 },
        ];
        let p = SdpProblem::new("aff", blocks, vec![DMatrix::zeros(3, 3)], Arc::new(Whole), eq, ProblemKind::Custom, None)
            .unwrap();
        let x = vec![DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 * 0.1)];
        let a = p.project_affine(&x);
        let b = p.project_affine(&a);
        assert!(norm(&lin(1.0, &a, -1.0, &b)) < 1e-12);
        assert!((a[0].trace() - 2.0).abs() < 1e-12);
        assert!(p.equality_residual(&a) < 1e-12);
    }
}
