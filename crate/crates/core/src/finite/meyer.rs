use std::collections::HashSet;

use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::trace::{
    weighted_sq_distance, IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step,
};

use super::{argmax_above, complement, resolve_init, slack, Init};

/// Hinge algorithm.
///
/// The current fit is the projection onto the face spanned by the hinge
/// edges (the equality projection with every non-hinge constraint
/// saturated). While that fit violates a hinge constraint, the hinge with
/// the most negative edge coefficient is dropped. Once the fit is feasible,
/// the saturated constraint with the most negative multiplier becomes a
/// hinge; if there is none the fit is optimal. The sum of squared errors
/// strictly decreases between consecutive feasible fits and no hinge set is
/// ever visited twice.
pub fn meyer_solve(signal: &Signal, cone: &ConeSystem, ctl: &IterControl, init: &Init) -> Result<SolverTrace> {
    let y = signal.y();
    let m = cone.m();
    let tol = slack(y);
    let mut hinge = resolve_init(signal, cone, init)?.hinge;
    let mut visited: HashSet<Vec<bool>> = HashSet::new();
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut stats = SolverStats::default();
    loop {
        if !visited.insert(hinge.clone()) {
            return Err(Error::Stalled(format!(
                "hinge set revisited after {} steps",
                stats.steps
            )));
        }
        let p = cone.project_equality_mask(y, &complement(&hinge))?;
        let ax = cone.apply_a(&p.x);
        let remove = argmax_above((0..m).filter(|&j| hinge[j]).map(|j| (j, ax[j])), tol);
        if let Some(j) = remove {
            if let Some(t) = monitor.exhausted(stats.steps) {
                return Ok(finish(monitor, cone, y, p.x, p.lambda, t, stats));
            }
            hinge[j] = false;
            stats.steps += 1;
            continue;
        }
        let sse = weighted_sq_distance(&p.x, y, cone.w());
        let add = argmax_above((0..m).filter(|&i| !hinge[i]).map(|i| (i, -p.lambda[i])), tol);
        let Some(i) = add else {
            let t = monitor.conclude(stats.steps, &p.x, &p.lambda, Some(sse));
            return Ok(finish(monitor, cone, y, p.x, p.lambda, t, stats));
        };
        if let Step::Stop(t) = monitor.check(stats.steps, &p.x, &p.lambda, Some(sse)) {
            return Ok(finish(monitor, cone, y, p.x, p.lambda, t, stats));
        }
        hinge[i] = true;
        stats.steps += 1;
    }
}

fn finish(
    monitor: Monitor<'_>,
    cone: &ConeSystem,
    y: &[f64],
    x: Vec<f64>,
    lambda: Vec<f64>,
    termination: crate::trace::Termination,
    stats: SolverStats,
) -> SolverTrace {
    let result = SolverResult::new(cone, y, x, lambda, termination, stats.steps);
    monitor.finish(result, stats)
}
