//! Ground-truth solutions for benchmark distances.

use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::finite::{block_active_set_solve, mpdb_solve, Init};
use crate::signal::Signal;
use crate::trace::{linf_distance, IterControl, SolverResult};
use crate::warmstart::{brute_force_project, BRUTE_FORCE_MAX_CONSTRAINTS};

/// Largest allowed L∞ gap between the two independent solutions, relative
/// to `max(1, ‖y‖∞)`.
pub const REFERENCE_AGREEMENT: f64 = 1e-7;

/// Certificate level the reference must pass.
pub const REFERENCE_CERTIFICATE: f64 = 1e-8;

/// Exact projection used as the reference point of a benchmark cell.
///
/// Small problems are enumerated exhaustively. Larger ones are solved twice,
/// by the sector walk (warm started) and by the block active-set method,
/// and the two answers must agree; a disagreement is reported rather than
/// resolved.
pub fn reference_solution(signal: &Signal, cone: &ConeSystem) -> Result<SolverResult> {
    if cone.m() <= BRUTE_FORCE_MAX_CONSTRAINTS {
        return brute_force_project(signal, cone);
    }
    let ctl = IterControl::default();
    let primary = mpdb_solve(signal, cone, &ctl, &Init::Pav)?.result;
    let secondary = block_active_set_solve(signal, cone, &ctl, &Init::Empty)?.result;
    reconcile(signal, primary, &secondary)
}

/// Accept `primary` as the reference if it is certified and agrees with the
/// independently computed `secondary`.
pub fn reconcile(signal: &Signal, primary: SolverResult, secondary: &SolverResult) -> Result<SolverResult> {
    let scale = signal.y().iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let gap = linf_distance(&primary.x, &secondary.x);
    if !(gap <= REFERENCE_AGREEMENT * scale) {
        return Err(Error::Disagreement(format!(
            "reference solvers differ by {gap:.3e} (limit {:.1e})",
            REFERENCE_AGREEMENT * scale
        )));
    }
    for (name, r) in [("primary", &primary), ("secondary", secondary)] {
        if !r.certificate.passes(REFERENCE_CERTIFICATE) {
            return Err(Error::Disagreement(format!(
                "{name} reference fails its certificate ({:.3e})",
                r.certificate.max()
            )));
        }
    }
    Ok(primary)
}
