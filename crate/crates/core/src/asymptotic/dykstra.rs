use crate::cone::ConeSystem;
use crate::error::Result;
use crate::signal::Signal;
use crate::trace::{IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step};

use super::{local, project_single};

/// Cyclic Dykstra projections onto the single-constraint cones `K_i`.
///
/// Keeps one correction `R_i` per constraint, supported on points
/// `i..i+2`. Each sub-step projects `x − R_i` onto `K_i` and stores the new
/// correction, so `x = y + Σ R_i` holds throughout. The multiplier of
/// constraint `i` is recovered from `R_i = −μ_i W⁻¹A_iᵀ`.
pub fn dykstra_solve(signal: &Signal, cone: &ConeSystem, ctl: &IterControl) -> Result<SolverTrace> {
    let trace = dykstra_run(signal, cone, ctl)?;
    Ok(trace.0)
}

/// Also returns the final corrections; used by tests of the bookkeeping.
pub(crate) fn dykstra_run(
    signal: &Signal,
    cone: &ConeSystem,
    ctl: &IterControl,
) -> Result<(SolverTrace, Vec<[f64; 3]>)> {
    let m = cone.m();
    let y = signal.y();
    let norms: Vec<f64> = (0..m).map(|i| cone.row_weighted_norm_sq(i)).collect();
    let mut corrections = vec![[0.0f64; 3]; m];
    let mut x = y.to_vec();
    let mut lambda = vec![0.0; m];
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut iteration = 0;
    let termination = loop {
        if let Step::Stop(t) = monitor.check(iteration, &x, &lambda, None) {
            break t;
        }
        for i in 0..m {
            let r = corrections[i];
            let cur = local(&x, i);
            let v = [cur[0] - r[0], cur[1] - r[1], cur[2] - r[2]];
            let (p, _) = project_single(cone, i, v);
            corrections[i] = [p[0] - v[0], p[1] - v[1], p[2] - v[2]];
            x[i..i + 3].copy_from_slice(&p);
        }
        for i in 0..m {
            let a = cone.row(i);
            let r = corrections[i];
            lambda[i] = (-(a[0] * r[0] + a[1] * r[1] + a[2] * r[2]) / norms[i]).max(0.0);
        }
        iteration += 1;
    };
    let result = SolverResult::new(cone, y, x, lambda, termination, iteration);
    Ok((monitor.finish(result, SolverStats::default()), corrections))
}
