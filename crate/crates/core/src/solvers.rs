//! Linear solvers and the defect-correction iteration.
//!
//! Three entry points:
//! * [`solve_full`]: pivoted sparse LU on the symmetric indefinite
//!   saddle system, with iterative refinement until the max-norm
//!   residual is below 1e-9 relative,
//! * [`solve_reduced`]: sparse Cholesky (LU fallback) or Jacobi-
//!   preconditioned conjugate gradients on the positive definite
//!   least-squares system,
//! * [`defect_correction`]: the outer iteration that recovers the
//!   saddle-point solution while only ever factorizing the reduced
//!   operator; the multiplier is advanced by the projected equation
//!   misfit, which is exact because the multiplier basis is orthonormal
//!   and contains div D + mu V.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};

use crate::assembly::{self, Csr, ProblemSpec, SparseSystem};
use crate::error::{Error, Result};
use crate::spaces::{FEFunction, SpaceId, Spaces};

/// Relative max-norm residual guaranteed by the direct solves.
const DIRECT_RESIDUAL_TOL: f64 = 1e-9;

/// How to solve the reduced system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Direct,
    Cg,
}

/// Solver tolerances and caps.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub mode: SolveMode,
    /// Relative residual tolerance for conjugate gradients.
    pub cg_rtol: f64,
    /// Defect-correction stopping tolerance on the L2 norm of the
    /// multiplier increment.
    pub defect_tol: f64,
    /// Defect-correction iteration cap.
    pub max_outer: usize,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig { mode: SolveMode::Direct, cg_rtol: 1e-10, defect_tol: 1e-6, max_outer: 50 }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.cg_rtol > 0.0) || !(self.defect_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::Config("iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Facts about how a solve went.
#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    /// Relative max-norm residual of the final linear solve.
    pub final_residual: f64,
    /// Iterative refinement steps taken by the direct path.
    pub refinement_steps: usize,
    /// Conjugate gradient iterations (when CG ran).
    pub cg_iterations: Option<usize>,
    /// Whether the CG energy decreased monotonically.
    pub cg_energy_monotone: Option<bool>,
    /// True when a CG request fell back to a direct factorization
    /// (gamma_T = 0 can make the reduced system semidefinite).
    pub direct_fallback: bool,
}

/// A solved discrete state with its boundary lifting re-attached.
pub struct DiscreteSolution {
    pub u_h: FEFunction,
    pub p_h: FEFunction,
    /// Multiplier; absent for reduced solves.
    pub z_h: Option<FEFunction>,
    /// Outer iterations (1 for single linear solves; for the defect
    /// correction, the count until the increment tolerance was met).
    pub iterations: usize,
    /// L2 norms of the multiplier increments, one per outer iteration
    /// (including polishing iterations past the stopping point).
    pub increment_history: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

static PARALLELISM: Once = Once::new();

/// Bit-for-bit reproducibility requires a fixed reduction order inside
/// the factorization kernels.
fn init_deterministic() {
    PARALLELISM.call_once(|| faer::set_global_parallelism(Par::Seq));
}

fn to_faer(csr: &Csr) -> Result<SparseColMat<usize, f64>> {
    let mut trips = Vec::with_capacity(csr.nnz());
    for r in 0..csr.nrows {
        for idx in csr.row_ptr[r]..csr.row_ptr[r + 1] {
            trips.push(Triplet { row: r, col: csr.col_idx[idx], val: csr.vals[idx] });
        }
    }
    SparseColMat::try_new_from_triplets(csr.nrows, csr.ncols, &trips)
        .map_err(|e| Error::Singular(format!("sparse conversion failed: {e:?}")))
}

enum Factorization {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

impl Factorization {
    fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        match self {
            Factorization::Llt(f) => f.solve_in_place(m.as_mut()),
            Factorization::Lu(f) => f.solve_in_place(m.as_mut()),
        }
        (0..b.len()).map(|i| m[(i, 0)]).collect()
    }
}

fn factorize_lu(mat: &SparseColMat<usize, f64>) -> Result<Factorization> {
    let symbolic = SymbolicLu::try_new(mat.symbolic())
        .map_err(|e| Error::Singular(format!("symbolic factorization failed: {e:?}")))?;
    let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
        .map_err(|e| Error::Singular(format!("numeric factorization failed: {e:?}")))?;
    Ok(Factorization::Lu(lu))
}

/// Cholesky when it succeeds (the reduced system is SPD for
/// gamma_T > 0), pivoted LU otherwise.
fn factorize_spd(mat: &SparseColMat<usize, f64>) -> Result<Factorization> {
    if let Ok(symbolic) = SymbolicLlt::try_new(mat.symbolic(), Side::Lower) {
        if let Ok(llt) = Llt::try_new_with_symbolic(symbolic, mat.as_ref(), Side::Lower) {
            return Ok(Factorization::Llt(llt));
        }
    }
    factorize_lu(mat)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct solve with at most two refinement passes; `strict` demands
/// the residual tolerance and errors out when it cannot be met.
fn solve_refined(
    csr: &Csr,
    fact: &Factorization,
    b: &[f64],
    strict: bool,
) -> Result<(Vec<f64>, f64, usize)> {
    let bnorm = max_abs(b);
    let mut x = fact.solve_vec(b);
    if bnorm == 0.0 {
        return Ok((x, 0.0, 0));
    }
    let mut steps = 0;
    loop {
        let ax = csr.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let res = max_abs(&r) / bnorm;
        if res <= DIRECT_RESIDUAL_TOL || steps == 2 {
            if strict && res > DIRECT_RESIDUAL_TOL {
                return Err(Error::Singular(format!(
                    "direct solve stalled at relative residual {res:.3e} after {steps} \
                     refinement passes; the system is numerically singular"
                )));
            }
            return Ok((x, res, steps));
        }
        let dx = fact.solve_vec(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        steps += 1;
    }
}

/// Solve the assembled saddle-point system by sparse factorization.
pub fn solve_full(
    spaces: &Spaces,
    system: &SparseSystem,
    config: &SolverConfig,
) -> Result<DiscreteSolution> {
    init_deterministic();
    config.validate()?;
    if system.layout.n_w == 0 {
        return Err(Error::Config(
            "system has no multiplier block; use the reduced solver".into(),
        ));
    }
    let mat = to_faer(&system.matrix)?;
    let fact = factorize_lu(&mat)?;
    let (x, final_residual, refinement_steps) =
        solve_refined(&system.matrix, &fact, &system.rhs, true)?;
    let (u_h, p_h, z_h) = system.solution_functions(spaces, &x);
    Ok(DiscreteSolution {
        u_h,
        p_h,
        z_h,
        iterations: 1,
        increment_history: Vec::new(),
        diagnostics: SolveDiagnostics { final_residual, refinement_steps, ..Default::default() },
    })
}

/// Jacobi-preconditioned conjugate gradients with an energy-decrease
/// diagnostic. Returns (solution, iterations, monotone, final
/// relative residual).
fn conjugate_gradient(a: &Csr, b: &[f64], rtol: f64) -> Result<(Vec<f64>, usize, bool, f64)> {
    let n = b.len();
    let bnorm = l2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0, true, 0.0));
    }
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let max_iters = 2 * n + 200;
    let mut last_energy = f64::INFINITY;
    let mut monotone = true;
    let mut rel = 1.0;
    for it in 1..=max_iters {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::CgStagnation { iters: it, rel_res: rel });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // E = x^T A x / 2 - b^T x, written without an extra matvec.
        let energy = -0.5 * (dot(&x, b) + dot(&x, &r));
        if energy > last_energy + 1e-12 * last_energy.abs() + 1e-300 {
            monotone = false;
        }
        last_energy = energy;
        rel = l2(&r) / bnorm;
        if rel <= rtol {
            return Ok((x, it, monotone, rel));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::CgStagnation { iters: max_iters, rel_res: rel })
}

/// Solve the assembled least-squares system.
pub fn solve_reduced(
    spaces: &Spaces,
    system: &SparseSystem,
    config: &SolverConfig,
) -> Result<DiscreteSolution> {
    init_deterministic();
    config.validate()?;
    if system.layout.n_w != 0 {
        return Err(Error::Config(
            "system carries a multiplier block; use the saddle-point solver".into(),
        ));
    }
    let mut diagnostics = SolveDiagnostics::default();
    // With gamma_T = 0 the operator can degenerate to semidefinite, so
    // a CG request quietly takes the factorization path.
    let use_cg = config.mode == SolveMode::Cg && spaces.config.gamma_t > 0.0;
    diagnostics.direct_fallback = config.mode == SolveMode::Cg && !use_cg;
    let x = if use_cg {
        let (x, iters, monotone, rel) =
            conjugate_gradient(&system.matrix, &system.rhs, config.cg_rtol)?;
        diagnostics.cg_iterations = Some(iters);
        diagnostics.cg_energy_monotone = Some(monotone);
        diagnostics.final_residual = rel;
        x
    } else {
        let mat = to_faer(&system.matrix)?;
        let fact = factorize_spd(&mat)?;
        let (x, res, steps) = solve_refined(&system.matrix, &fact, &system.rhs, true)?;
        diagnostics.final_residual = res;
        diagnostics.refinement_steps = steps;
        x
    };
    let (u_h, p_h, _) = system.solution_functions(spaces, &x);
    let iterations = diagnostics.cg_iterations.unwrap_or(1);
    Ok(DiscreteSolution {
        u_h,
        p_h,
        z_h: None,
        iterations,
        increment_history: Vec::new(),
        diagnostics,
    })
}

/// One full state of the defect-correction engine.
struct DefectEngine<'a> {
    spaces: &'a Spaces,
    system: SparseSystem,
    fact: Factorization,
    mu: f64,
}

impl<'a> DefectEngine<'a> {
    fn new(spaces: &'a Spaces, problem: &ProblemSpec) -> Result<DefectEngine<'a>> {
        let cfg = &spaces.config;
        if cfg.m != cfg.k {
            return Err(Error::Config(
                "defect correction needs the multiplier order to match the primal order \
                 (m = k) so the multiplier update is exact"
                    .into(),
            ));
        }
        let identity = problem.a == [[1.0, 0.0], [0.0, 1.0]];
        if !(cfg.gamma_t > 0.0 || (cfg.k == 1 && identity)) {
            return Err(Error::Config(
                "defect correction needs gamma_T > 0 (first order with identity \
                 diffusivity is the only exception)"
                    .into(),
            ));
        }
        let system = assembly::assemble_reduced(spaces, problem)?;
        let mat = to_faer(&system.matrix)?;
        let fact = factorize_spd(&mat)?;
        Ok(DefectEngine { spaces, system, fact, mu: problem.mu })
    }

    /// One outer step: reduced solve against the current multiplier,
    /// then advance the multiplier by the projected equation misfit.
    /// Returns the updated state and the increment norm.
    fn step<F>(&self, z: &mut FEFunction, f_tilde: &F) -> Result<(FEFunction, FEFunction, f64)>
    where
        F: Fn(usize, f64, f64) -> f64,
    {
        let load = assembly::multiplier_load(self.spaces, self.mu, z);
        let rhs: Vec<f64> =
            self.system.rhs.iter().zip(&load).map(|(r, l)| r - l).collect();
        let (x, _, _) = solve_refined(&self.system.matrix, &self.fact, &rhs, false)?;
        let (u, p, _) = self.system.solution_functions(self.spaces, &x);
        let moments = assembly::w_misfit_moments(self.spaces, self.mu, &u, &p, f_tilde);
        let increment = l2(&moments);
        for (zi, mi) in z.coeffs.iter_mut().zip(&moments) {
            *zi += mi;
        }
        Ok((u, p, increment))
    }
}

/// Recover the saddle-point solution (with s* = 0) through repeated
/// reduced solves: the operator is factorized once, each iteration
/// costs one back-substitution plus the multiplier update.
pub fn defect_correction(
    spaces: &Spaces,
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<DiscreteSolution> {
    init_deterministic();
    config.validate()?;
    let engine = DefectEngine::new(spaces, problem)?;
    let f_tilde = problem.volume_source(spaces);
    let mut z = spaces.zero(SpaceId::W);
    let mut history = Vec::new();
    let mut state: Option<(FEFunction, FEFunction)> = None;
    let mut iterations = None;
    for it in 1..=config.max_outer {
        let (u, p, inc) = engine.step(&mut z, &f_tilde)?;
        history.push(inc);
        state = Some((u, p));
        if inc <= config.defect_tol {
            iterations = Some(it);
            break;
        }
    }
    let Some(iterations) = iterations else {
        return Err(Error::DefectNonConvergence {
            iters: config.max_outer,
            last_increment: history.last().copied().unwrap_or(f64::NAN),
        });
    };
    // Polish: cheap extra back-substitutions until the increment is
    // negligible, so the returned state satisfies both equations (and
    // cellwise conservation) well below the stopping tolerance.
    let polish_tol = config.defect_tol * 1e-4;
    for _ in 0..10 {
        let last = *history.last().unwrap();
        if last <= polish_tol {
            break;
        }
        let (u, p, inc) = engine.step(&mut z, &f_tilde)?;
        history.push(inc);
        state = Some((u, p));
        if inc >= last {
            break; // stalled at rounding level
        }
    }
    let (u_h, p_h) = state.unwrap();
    Ok(DiscreteSolution {
        u_h,
        p_h,
        z_h: Some(z),
        iterations,
        increment_history: history,
        diagnostics: SolveDiagnostics::default(),
    })
}

/// Iterate counts of the raw defect recursion, for inspecting its
/// decay structure; meaningful with zero boundary data (the engine
/// energies are computed over the free dofs alone).
pub struct DefectTrace {
    /// ||z^kappa|| for kappa = 0..n.
    pub z_norms: Vec<f64>,
    /// Primal stabilizer energy s[x, x] of each reduced solve.
    pub s_energies: Vec<f64>,
    /// ||z^{kappa+1} - z^kappa|| per step.
    pub increments: Vec<f64>,
}

/// Run exactly `n_steps` defect steps from a seeded multiplier.
pub fn defect_iteration_trace(
    spaces: &Spaces,
    problem: &ProblemSpec,
    z0: &FEFunction,
    n_steps: usize,
) -> Result<DefectTrace> {
    init_deterministic();
    let engine = DefectEngine::new(spaces, problem)?;
    let f_tilde = problem.volume_source(spaces);
    let mut z = z0.clone();
    let mut trace = DefectTrace {
        z_norms: vec![l2(&z.coeffs)],
        s_energies: Vec::new(),
        increments: Vec::new(),
    };
    for _ in 0..n_steps {
        let load = assembly::multiplier_load(spaces, engine.mu, &z);
        let rhs: Vec<f64> =
            engine.system.rhs.iter().zip(&load).map(|(r, l)| r - l).collect();
        let (x, _, _) = solve_refined(&engine.system.matrix, &engine.fact, &rhs, false)?;
        let (u, p, _) = engine.system.solution_functions(spaces, &x);
        // s[x, x] = x^T R x - ||div p + mu u||^2 (the misfit moments
        // with f = 0 capture the residual exactly since m = k).
        let rx = engine.system.matrix.matvec(&x);
        let homogeneous = assembly::w_misfit_moments(spaces, engine.mu, &u, &p, |_, _, _| 0.0);
        let s_energy = dot(&x, &rx) - homogeneous.iter().map(|m| m * m).sum::<f64>();
        trace.s_energies.push(s_energy);
        let moments = assembly::w_misfit_moments(spaces, engine.mu, &u, &p, &f_tilde);
        trace.increments.push(l2(&moments));
        for (zi, mi) in z.coeffs.iter_mut().zip(&moments) {
            *zi += mi;
        }
        trace.z_norms.push(l2(&z.coeffs));
    }
    Ok(trace)
}
