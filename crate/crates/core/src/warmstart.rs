//! Greedy warm start and the exhaustive small-problem oracle.

use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::trace::{linf_distance, SolverResult, Termination};

/// Violation below which a constraint counts as met.
pub const PAV_TOLERANCE: f64 = 1e-9;

/// Largest constraint count accepted by [`brute_force_project`].
pub const BRUTE_FORCE_MAX_CONSTRAINTS: usize = 20;

/// Acceptance threshold of a candidate in the oracle enumeration.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

/// Output of [`pav_warm_start`].
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    /// Primal-feasible approximation.
    pub x: Vec<f64>,
    /// Constraints saturated along the way, sorted.
    pub saturated: Vec<usize>,
    /// Number of equality projections performed.
    pub projections: usize,
}

/// Greedy saturation warm start.
///
/// Starting from `x = y`, the most violated constraint (lowest index on
/// ties) is saturated and `x` is replaced by the projection of `y` onto the
/// subspace where every constraint saturated so far holds with equality,
/// i.e. the best continuous piecewise-linear fit whose knots are the
/// remaining constraints. Constraints are only ever added, so at most `m`
/// projections of cost `O(n)` are made and the loop ends at a feasible
/// point (with every constraint saturated the fit is affine). Multipliers
/// are never checked, so the result is feasible but in general not optimal.
pub fn pav_warm_start(signal: &Signal, cone: &ConeSystem) -> Result<WarmStart> {
    let y = signal.y();
    let m = cone.m();
    let mut saturated = vec![false; m];
    let mut x = y.to_vec();
    let mut projections = 0;
    loop {
        let mut worst: Option<(usize, f64)> = None;
        for i in (0..m).filter(|&i| !saturated[i]) {
            let v = cone.row_dot(i, &x);
            if v > PAV_TOLERANCE && worst.is_none_or(|(_, b)| v > b) {
                worst = Some((i, v));
            }
        }
        let Some((i, _)) = worst else {
            break;
        };
        if projections == m {
            return Err(Error::Stalled("every constraint saturated yet still violated".into()));
        }
        saturated[i] = true;
        projections += 1;
        x = cone.equality_fit(y, &saturated)?;
    }
    Ok(WarmStart {
        x,
        saturated: (0..m).filter(|&i| saturated[i]).collect(),
        projections,
    })
}

/// Exact projection by enumerating every saturated set.
///
/// For each of the `2^m` subsets the equality-constrained projection is
/// computed and kept if it is primal feasible with nonnegative multipliers
/// (both to [`ORACLE_TOLERANCE`]). All kept candidates must coincide;
/// anything else is reported as an internal inconsistency.
pub fn brute_force_project(signal: &Signal, cone: &ConeSystem) -> Result<SolverResult> {
    let m = cone.m();
    if m > BRUTE_FORCE_MAX_CONSTRAINTS {
        return Err(Error::InvalidArgument(format!(
            "enumeration limited to {BRUTE_FORCE_MAX_CONSTRAINTS} constraints, got {m}"
        )));
    }
    let y = signal.y();
    let scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut found: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut passing = 0usize;
    let mut mask = vec![false; m];
    for bits in 0u32..(1u32 << m) {
        for (i, s) in mask.iter_mut().enumerate() {
            *s = bits >> i & 1 == 1;
        }
        let p = cone.project_equality_mask(y, &mask)?;
        let primal_ok = cone.max_violation(&p.x) <= ORACLE_TOLERANCE;
        let dual_ok = p.lambda.iter().all(|&l| l >= -ORACLE_TOLERANCE);
        if !(primal_ok && dual_ok) {
            continue;
        }
        passing += 1;
        match &found {
            None => found = Some((p.x, p.lambda)),
            Some((x0, _)) => {
                let gap = linf_distance(x0, &p.x);
                if gap > 1e-7 * scale {
                    return Err(Error::Oracle(format!(
                        "two feasible saturated sets give projections {gap:e} apart"
                    )));
                }
            }
        }
    }
    let (x, mut lambda) = found.ok_or_else(|| {
        Error::Oracle(format!("none of the {} saturated sets passed", 1u64 << m))
    })?;
    debug_assert!(passing >= 1);
    for l in &mut lambda {
        *l = l.max(0.0);
    }
    Ok(SolverResult::new(cone, y, x, lambda, Termination::Converged, 1usize << m))
}
