//! C ABI for the concave regression solvers.
//!
//! Problems and solutions are opaque heap handles released with their
//! `*_free` function. Every entry point returns a [`ConeregStatus`]; on
//! failure a message is kept per thread and can be copied out with
//! [`conereg_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use conereg::trace::{IterControl, SolverResult, Termination};
use conereg::{build_cone_system, ConeSystem, Error, Signal, SolverId};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSignal = 3,
    UnknownSolver = 4,
    /// A factorisation or update hit a (near) singular matrix.
    Numerical = 5,
    /// The solver diverged or stalled.
    NotConverged = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Why a solve stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeregTermination {
    Converged = 0,
    ReferenceReached = 1,
    IterationLimit = 2,
    TimeBudget = 3,
    Inexact = 4,
}

/// Solve options. Start from [`conereg_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeregOptions {
    pub max_iterations: u64,
    /// Threshold on the scaled KKT residuals; must be positive.
    pub stop_tolerance: f64,
    /// Thread CPU seconds; zero or negative means unlimited.
    pub cpu_budget: f64,
}

/// Scaled KKT residuals of a solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConeregCertificate {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub stationarity: f64,
}

/// Opaque regression problem.
pub struct ConeregProblem {
    signal: Signal,
    cone: ConeSystem,
}

/// Opaque solve result.
pub struct ConeregSolution {
    result: SolverResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn fail(status: ConeregStatus, message: impl Into<String>) -> ConeregStatus {
    set_error(message.into());
    status
}

fn status_of(e: &Error) -> ConeregStatus {
    match e {
        Error::InvalidSignal(_) | Error::Parse { .. } => ConeregStatus::InvalidSignal,
        Error::InvalidArgument(_) | Error::Io { .. } => ConeregStatus::InvalidArgument,
        Error::RankDeficient { .. }
        | Error::SingularUpdate { .. }
        | Error::DependentColumn { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::Singular(_) => ConeregStatus::Numerical,
        Error::Divergence(_) | Error::Stalled(_) => ConeregStatus::NotConverged,
        Error::Oracle(_) | Error::Disagreement(_) => ConeregStatus::Internal,
    }
}

/// Run `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), ConeregStatus>) -> ConeregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ConeregStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(ConeregStatus::Internal, "internal panic"),
    }
}

fn lift<T>(r: conereg::Result<T>) -> Result<T, ConeregStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

/// # Safety
/// `p` must be null or valid for `n` reads.
unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], ConeregStatus> {
    if p.is_null() {
        return Err(fail(ConeregStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), ConeregStatus> {
    if p.is_null() {
        Err(fail(ConeregStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn conereg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn conereg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[no_mangle]
pub extern "C" fn conereg_options_default() -> ConeregOptions {
    let d = IterControl::default();
    ConeregOptions {
        max_iterations: d.max_iterations as u64,
        stop_tolerance: d.stop_tolerance,
        cpu_budget: 0.0,
    }
}

/// Build a problem from `n` abscissae `z` (strictly increasing),
/// observations `y` and weights `w` (null for unit weights).
///
/// # Safety
/// `z` and `y` must be valid for `n` reads, `w` null or valid for `n`
/// reads, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn conereg_problem_new(
    z: *const f64,
    y: *const f64,
    w: *const f64,
    n: usize,
    out: *mut *mut ConeregProblem,
) -> ConeregStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let z = slice(z, n, "z")?.to_vec();
        let y = slice(y, n, "y")?.to_vec();
        let w = if w.is_null() {
            vec![1.0; n]
        } else {
            slice(w, n, "w")?.to_vec()
        };
        let signal = lift(Signal::new(z, y, w))?;
        let cone = build_cone_system(&signal);
        *out = Box::into_raw(Box::new(ConeregProblem { signal, cone }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`conereg_problem_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn conereg_problem_free(problem: *mut ConeregProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of points of a problem (0 for null).
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conereg_problem_len(problem: *const ConeregProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.signal.len())
}

/// Solve with the named solver (for example `"mpdb-pav"` or `"admm"`).
/// `options` may be null for defaults. A run that stops on its budget still
/// returns `Ok`; inspect [`conereg_solution_termination`].
///
/// # Safety
/// `problem` must be a live handle, `solver` a NUL-terminated string,
/// `options` null or valid, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn conereg_solve(
    problem: *const ConeregProblem,
    solver: *const c_char,
    options: *const ConeregOptions,
    out: *mut *mut ConeregSolution,
) -> ConeregStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(problem, "problem")?;
        non_null(solver, "solver")?;
        let problem = &*problem;
        let name = CStr::from_ptr(solver)
            .to_str()
            .map_err(|_| fail(ConeregStatus::UnknownSolver, "solver name is not UTF-8"))?;
        let id: SolverId = name
            .parse()
            .map_err(|e: Error| fail(ConeregStatus::UnknownSolver, e.to_string()))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| conereg_options_default());
        let mut ctl = IterControl::default()
            .with_max_iterations(usize::try_from(opts.max_iterations).unwrap_or(usize::MAX))
            .with_tolerance(opts.stop_tolerance)
            .with_stride(usize::MAX);
        if opts.cpu_budget > 0.0 {
            ctl = ctl.with_budget(opts.cpu_budget);
        }
        let trace = lift(id.run(&problem.signal, &problem.cone, &ctl))?;
        *out = Box::into_raw(Box::new(ConeregSolution { result: trace.result }));
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle from [`conereg_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conereg_solution_free(solution: *mut ConeregSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of fitted values (0 for null).
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conereg_solution_len(solution: *const ConeregSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.result.x.len())
}

/// Number of multipliers, one per constraint (0 for null).
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conereg_solution_constraints(solution: *const ConeregSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.result.lambda.len())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), ConeregStatus> {
    non_null(buf, "buffer")?;
    if len < src.len() {
        return Err(fail(
            ConeregStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copy the fitted values into `buf`, which must hold
/// [`conereg_solution_len`] doubles.
///
/// # Safety
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn conereg_solution_x(
    solution: *const ConeregSolution,
    buf: *mut f64,
    len: usize,
) -> ConeregStatus {
    guard(|| {
        non_null(solution, "solution")?;
        copy_out(&(*solution).result.x, buf, len)
    })
}

/// Copy the multipliers into `buf`, which must hold
/// [`conereg_solution_constraints`] doubles.
///
/// # Safety
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn conereg_solution_lambda(
    solution: *const ConeregSolution,
    buf: *mut f64,
    len: usize,
) -> ConeregStatus {
    guard(|| {
        non_null(solution, "solution")?;
        copy_out(&(*solution).result.lambda, buf, len)
    })
}

/// # Safety
/// `solution` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn conereg_solution_termination(
    solution: *const ConeregSolution,
    out: *mut ConeregTermination,
) -> ConeregStatus {
    guard(|| {
        non_null(solution, "solution")?;
        non_null(out, "out")?;
        *out = match (*solution).result.termination {
            Termination::Converged => ConeregTermination::Converged,
            Termination::ReferenceReached => ConeregTermination::ReferenceReached,
            Termination::IterationLimit => ConeregTermination::IterationLimit,
            Termination::TimeBudget => ConeregTermination::TimeBudget,
            Termination::Inexact => ConeregTermination::Inexact,
        };
        Ok(())
    })
}

/// # Safety
/// `solution` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn conereg_solution_certificate(
    solution: *const ConeregSolution,
    out: *mut ConeregCertificate,
) -> ConeregStatus {
    guard(|| {
        non_null(solution, "solution")?;
        non_null(out, "out")?;
        let c = (*solution).result.certificate;
        *out = ConeregCertificate {
            primal: c.primal,
            dual: c.dual,
            complementarity: c.complementarity,
            stationarity: c.stationarity,
        };
        Ok(())
    })
}

/// Iterations (or active-set steps) performed; 0 for null.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conereg_solution_iterations(solution: *const ConeregSolution) -> u64 {
    solution.as_ref().map_or(0, |s| s.result.iterations as u64)
}
