//! C interface to the data-completion solver: benchmark problems
//! behind opaque handles, a single-mesh solve, an error report, and
//! pointwise evaluation of the reconstructed fields.
//!
//! Every entry point catches panics, never unwinds into the caller,
//! and reports failures through [`CauchyStatus`]; the most recent
//! failure message on the calling thread is available through
//! [`cauchy_last_error`].

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use cauchy_mfem::error::Error;
use cauchy_mfem::experiments::{self, Case, RunConfig, RunVariant};
use cauchy_mfem::metrics::{self, ErrorReport};
use cauchy_mfem::solvers::{self, DiscreteSolution, SolverConfig};
use cauchy_mfem::spaces::interp::locate_element;
use cauchy_mfem::spaces::{SpaceConfig, Spaces};

/// Outcome of a call. Nonzero values partition the failures the same
/// way the command-line driver's exit codes do, plus the two purely
/// interfacial conditions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauchyStatus {
    /// The call succeeded.
    Ok = 0,
    /// Runtime failure: I/O, or a point outside the mesh.
    Runtime = 1,
    /// The linear or outer solver failed.
    Solver = 2,
    /// Invalid configuration or arguments.
    Config = 3,
    /// A required pointer was null.
    NullPointer = 4,
    /// An internal invariant failed; the handle is still valid.
    Panic = 5,
}

/// Benchmark selector accepted by [`cauchy_problem_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauchyCase {
    /// Harmonic mode with data on the bottom edge, Dirichlet values
    /// also on the lateral edges.
    Hadamard1 = 0,
    /// Harmonic mode with all data confined to the bottom edge.
    Hadamard2 = 1,
    /// All-boundary Dirichlet validation problem.
    Wellposed = 2,
}

/// Discretization selector accepted by [`cauchy_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauchyVariant {
    /// Equal-order stabilized pair (first order only).
    InfSup = 0,
    /// Reduced-flux pair with the gradient-penalty dual stabilizer.
    WellBalanced = 1,
    /// Least-squares reduction without a multiplier.
    Reduced = 2,
    /// Defect-correction iteration toward the equal-order target.
    Defect = 3,
}

/// Scalar summary of one solve, mirroring one row of the CSV schema.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CauchyReport {
    /// Largest element diameter of the mesh.
    pub h: f64,
    pub rel_l2_global: f64,
    /// Relative L2 error on the half of the domain nearest the data.
    pub rel_l2_local: f64,
    pub rel_h1s_global: f64,
    pub rel_h1s_local: f64,
    /// Stabilizer-plus-residual norm of the discrete error pair.
    pub tnorm_residual: f64,
    /// Broken 1,h norm of the multiplier (zero without one).
    pub multiplier_norm_1h: f64,
    /// Largest elementwise balance defect of the flux.
    pub max_conservation_residual: f64,
    /// L2 mismatch of the flux trace against the prescribed datum.
    pub boundary_flux_error: f64,
    pub dof_scalar: usize,
    pub dof_flux: usize,
    pub dof_multiplier: usize,
    /// Outer iterations (1 for the single linear solves).
    pub outer_iterations: usize,
}

/// Opaque benchmark description: geometry, data layout, coefficients,
/// and the noise model.
pub struct CauchyProblem {
    case: Case,
    n: usize,
    delta: f64,
    seed: u64,
}

/// Opaque solved state: the discrete spaces and the reconstructed
/// fields on one mesh.
pub struct CauchySolution {
    spaces: Spaces,
    fields: DiscreteSolution,
    report: ErrorReport,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: CauchyStatus, message: impl Into<String>) -> CauchyStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
    status
}

fn fail_with(err: Error) -> CauchyStatus {
    let status = match err.exit_code() {
        3 => CauchyStatus::Config,
        2 => CauchyStatus::Solver,
        _ => CauchyStatus::Runtime,
    };
    fail(status, err.to_string())
}

fn guarded<F: FnOnce() -> CauchyStatus>(body: F) -> CauchyStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown internal failure".into());
            fail(CauchyStatus::Panic, msg)
        }
    }
}

/// Version of the library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cauchy_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the most recent failure message of this thread into `buf`
/// (NUL-terminated, truncated to `cap` bytes including the NUL) and
/// return the full message length in bytes. With a null `buf` or zero
/// `cap`, only the length is reported.
#[no_mangle]
pub unsafe extern "C" fn cauchy_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Create a benchmark problem. `n` is the mode number of the harmonic
/// benchmarks (must be >= 1) and is ignored by the well-posed case.
/// On success `*out` owns the handle; release it with
/// [`cauchy_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn cauchy_problem_new(
    case: CauchyCase,
    n: usize,
    out: *mut *mut CauchyProblem,
) -> CauchyStatus {
    guarded(|| {
        if out.is_null() {
            return fail(CauchyStatus::NullPointer, "out must not be null");
        }
        let case = match case {
            CauchyCase::Hadamard1 => Case::Hadamard1,
            CauchyCase::Hadamard2 => Case::Hadamard2,
            CauchyCase::Wellposed => Case::Wellposed,
        };
        let n = if case == Case::Wellposed { 1 } else { n };
        // Reject a bad mode number now rather than at solve time.
        if case != Case::Wellposed {
            if let Err(e) = experiments::hadamard_exact(n) {
                return fail_with(e);
            }
        }
        let handle = Box::new(CauchyProblem { case, n, delta: 0.0, seed: 0 });
        *out = Box::into_raw(handle);
        CauchyStatus::Ok
    })
}

/// Attach multiplicative noise of relative amplitude `delta` to the
/// flux datum, drawn reproducibly from `seed`. Amplitude zero restores
/// the clean data.
#[no_mangle]
pub unsafe extern "C" fn cauchy_problem_set_noise(
    problem: *mut CauchyProblem,
    delta: f64,
    seed: u64,
) -> CauchyStatus {
    guarded(|| {
        let Some(problem) = problem.as_mut() else {
            return fail(CauchyStatus::NullPointer, "problem must not be null");
        };
        if !(delta >= 0.0 && delta.is_finite()) {
            return fail(
                CauchyStatus::Config,
                format!("noise amplitude must be finite and >= 0, got {delta}"),
            );
        }
        problem.delta = delta;
        problem.seed = seed;
        CauchyStatus::Ok
    })
}

/// Release a problem handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cauchy_problem_free(problem: *mut CauchyProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solve the problem on an `nx` by `ny` crossed grid with primal order
/// `k` (1 or 2) and gradient-penalty weight `gamma_t`, then attach the
/// error report against the benchmark's exact solution. On success
/// `*out` owns the handle; release it with [`cauchy_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn cauchy_solve(
    problem: *const CauchyProblem,
    k: usize,
    variant: CauchyVariant,
    gamma_t: f64,
    nx: usize,
    ny: usize,
    out: *mut *mut CauchySolution,
) -> CauchyStatus {
    guarded(|| {
        let Some(problem) = problem.as_ref() else {
            return fail(CauchyStatus::NullPointer, "problem must not be null");
        };
        if out.is_null() {
            return fail(CauchyStatus::NullPointer, "out must not be null");
        }
        if nx == 0 || ny == 0 {
            return fail(CauchyStatus::Config, "mesh sizes must be positive");
        }
        let variant = match variant {
            CauchyVariant::InfSup => RunVariant::InfSup,
            CauchyVariant::WellBalanced => RunVariant::WellBalanced,
            CauchyVariant::Reduced => RunVariant::Reduced,
            CauchyVariant::Defect => RunVariant::Defect,
        };
        match solve_impl(problem, k, variant, gamma_t, nx, ny) {
            Ok(solution) => {
                *out = Box::into_raw(Box::new(solution));
                CauchyStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

fn solve_impl(
    problem: &CauchyProblem,
    k: usize,
    variant: RunVariant,
    gamma_t: f64,
    nx: usize,
    ny: usize,
) -> Result<CauchySolution, Error> {
    let mut cfg = match variant {
        RunVariant::Defect => SpaceConfig::defect_target(k)?,
        RunVariant::InfSup => SpaceConfig::new(k, cauchy_mfem::spaces::Variant::InfSup)?,
        RunVariant::WellBalanced => {
            SpaceConfig::new(k, cauchy_mfem::spaces::Variant::WellBalanced)?
        }
        RunVariant::Reduced => SpaceConfig::new(k, cauchy_mfem::spaces::Variant::Reduced)?,
    };
    cfg.gamma_t = gamma_t;
    cfg.validate()?;
    let run = RunConfig {
        case: problem.case,
        n: problem.n,
        k,
        variant,
        gamma_t,
        delta: problem.delta,
        seed: problem.seed,
        ladder: vec![(nx, ny)],
        out: None,
    };
    let spaces = experiments::build_spaces(problem.case, nx, ny, cfg)?;
    let spec = experiments::build_problem(&run)?;
    let solver = SolverConfig::default();
    let fields = match variant {
        RunVariant::Defect => solvers::defect_correction(&spaces, &spec, &solver)?,
        RunVariant::Reduced => {
            let sys = cauchy_mfem::assembly::assemble_reduced(&spaces, &spec)?;
            solvers::solve_reduced(&spaces, &sys, &solver)?
        }
        RunVariant::InfSup | RunVariant::WellBalanced => {
            let sys = cauchy_mfem::assembly::assemble_full(&spaces, &spec)?;
            solvers::solve_full(&spaces, &sys, &solver)?
        }
    };
    let exact = match problem.case {
        Case::Wellposed => experiments::wellposed_exact(),
        _ => experiments::hadamard_exact(problem.n)?,
    };
    let report = metrics::error_norms(&spaces, &spec, &*exact.u, &*exact.grad_u, &fields, 0.5)?;
    Ok(CauchySolution { spaces, fields, report })
}

/// Fill `*out` with the scalar summary of a solve.
#[no_mangle]
pub unsafe extern "C" fn cauchy_solution_report(
    solution: *const CauchySolution,
    out: *mut CauchyReport,
) -> CauchyStatus {
    guarded(|| {
        let Some(solution) = solution.as_ref() else {
            return fail(CauchyStatus::NullPointer, "solution must not be null");
        };
        if out.is_null() {
            return fail(CauchyStatus::NullPointer, "out must not be null");
        }
        let r = &solution.report;
        *out = CauchyReport {
            h: r.h,
            rel_l2_global: r.rel_l2_global,
            rel_l2_local: r.rel_l2_local,
            rel_h1s_global: r.rel_h1s_global,
            rel_h1s_local: r.rel_h1s_local,
            tnorm_residual: r.tnorm_residual,
            multiplier_norm_1h: r.z_1h_norm,
            max_conservation_residual: r.max_conservation_residual,
            boundary_flux_error: r.boundary_flux_error,
            dof_scalar: r.dof_v,
            dof_flux: r.dof_d,
            dof_multiplier: r.dof_w,
            outer_iterations: r.iterations,
        };
        CauchyStatus::Ok
    })
}

/// Evaluate the reconstructed fields at a point of the closed domain:
/// the scalar into `*u`, the flux components into `*px` and `*py`.
/// Each output pointer may be null to skip that value. A point outside
/// the mesh is a runtime error and leaves the outputs untouched.
#[no_mangle]
pub unsafe extern "C" fn cauchy_solution_eval(
    solution: *const CauchySolution,
    x: f64,
    y: f64,
    u: *mut f64,
    px: *mut f64,
    py: *mut f64,
) -> CauchyStatus {
    guarded(|| {
        let Some(solution) = solution.as_ref() else {
            return fail(CauchyStatus::NullPointer, "solution must not be null");
        };
        let spaces = &solution.spaces;
        let e = match locate_element(spaces, x, y) {
            Ok(e) => e,
            Err(err) => return fail_with(err),
        };
        if !u.is_null() {
            *u = spaces.eval_v_on_element(&solution.fields.u_h, e, x, y);
        }
        if !px.is_null() || !py.is_null() {
            let value = spaces.eval_d_on_element(&solution.fields.p_h, e, x, y);
            if !px.is_null() {
                *px = value[0];
            }
            if !py.is_null() {
                *py = value[1];
            }
        }
        CauchyStatus::Ok
    })
}

/// Release a solution handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cauchy_solution_free(solution: *mut CauchySolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}
