use nalgebra::{DMatrix, DVector};

use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::kernels::{TrackedInverse, DEFAULT_REFRESH_PERIOD};
use crate::signal::Signal;
use crate::trace::{IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step};

use super::{complement, resolve_init, Init};

const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_9;
const MAX_REBLOCKS: usize = 8;

/// Sector walk in the scaled frame.
///
/// Space is partitioned into sectors `S_J = pos(β_J) + pos(γ_{Jᶜ}) + L`,
/// one per hinge set `J`, where `L` is the lineality space. The projection
/// of any point of `S_J` onto the cone is its `β_J` part plus its `L` part.
/// Starting from a point `p` inside a known sector, the walk follows the
/// segment from `p` to the data and exchanges one basis column per facet
/// crossing until the data lies in the current sector. Coordinates are kept
/// through a Sherman–Morrison maintained inverse of the mixed basis.
///
/// Coordinates that start exactly on a facet are pushed inside by a small
/// deterministic perturbation, which only changes the path.
pub fn mpdb_solve(signal: &Signal, cone: &ConeSystem, ctl: &IterControl, init: &Init) -> Result<SolverTrace> {
    let y = signal.y();
    let n = cone.n();
    let m = cone.m();
    let start = resolve_init(signal, cone, init)?;
    let mut hinge = start.hinge;
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut stats = SolverStats::default();

    let u = cone.to_scaled(y);
    let scale = u.amax().max(1.0);
    let eps = 1e-9 * scale;
    let coord_tol = 1e-12 * scale;
    let perturb = |i: usize, factor: f64| factor * eps * (1.0 + (i as f64 * GOLDEN_FRACTION).fract());

    let mut c_p = vec![0.0; m];
    let start_values = start.point.as_ref().map(|x| cone.apply_a(x));
    for (i, c) in c_p.iter_mut().enumerate() {
        *c = match &start_values {
            Some(ax) if hinge[i] => -ax[i],
            _ => 0.0,
        };
        if *c <= eps {
            *c = perturb(i, 1.0);
            stats.perturbations += 1;
        }
    }

    let mut basis = initial_basis(cone, &hinge)?;
    let mut c_u = basis.inverse() * &u;
    let mut last: Option<usize> = None;
    let mut reblocks = 0usize;

    loop {
        let blocking = ratio_test(&c_p, &c_u, coord_tol);
        let Some((k, t)) = blocking else {
            let p = cone.project_equality_mask(y, &complement(&hinge))?;
            let dist = residual_norm(&basis, &c_u, &c_p, n, m);
            let term = monitor.conclude(stats.steps, &p.x, &p.lambda, Some(dist));
            let result = SolverResult::new(cone, y, p.x, p.lambda, term, stats.steps);
            return Ok(monitor.finish(result, stats));
        };

        if last == Some(k) && t <= 1e-12 {
            reblocks += 1;
            if reblocks > MAX_REBLOCKS {
                return Err(Error::Stalled(format!("sector facet {k} keeps blocking the walk")));
            }
            basis.refresh()?;
            stats.rebuilds += 1;
            c_u = basis.inverse() * &u;
            c_p[k] = perturb(k, 10f64.powi(reblocks as i32));
            stats.perturbations += 1;
            continue;
        }
        reblocks = 0;

        if let Some(term) = monitor.exhausted(stats.steps) {
            let p = cone.project_equality_mask(y, &complement(&hinge))?;
            let result = SolverResult::new(cone, y, p.x, p.lambda, term, stats.steps);
            return Ok(monitor.finish(result, stats));
        }

        for (cp, &cu) in c_p.iter_mut().zip(c_u.iter()) {
            *cp = (1.0 - t) * *cp + t * cu;
        }
        c_p[k] = perturb(k, 1.0);
        hinge[k] = !hinge[k];
        let column = edge_column(cone, k, hinge[k])?;
        if let Err(e) = basis.replace_column(k, &column) {
            match e {
                Error::SingularUpdate { .. } => {
                    basis = TrackedInverse::with_refresh_period(
                        basis.matrix().clone_with_column(k, &column),
                        DEFAULT_REFRESH_PERIOD,
                    )?;
                    stats.rebuilds += 1;
                }
                other => return Err(other),
            }
        }
        c_u = basis.inverse() * &u;
        stats.steps += 1;
        last = Some(k);

        if stats.steps % ctl.trace_stride == 0 || ctl.reference.is_some() {
            let p = cone.project_equality_mask(y, &complement(&hinge))?;
            let dist = residual_norm(&basis, &c_u, &c_p, n, m);
            if let Step::Stop(term) = monitor.check(stats.steps, &p.x, &p.lambda, Some(dist)) {
                let result = SolverResult::new(cone, y, p.x, p.lambda, term, stats.steps);
                return Ok(monitor.finish(result, stats));
            }
        }
    }
}

trait WithColumn {
    fn clone_with_column(&self, k: usize, column: &DVector<f64>) -> DMatrix<f64>;
}

impl WithColumn for DMatrix<f64> {
    fn clone_with_column(&self, k: usize, column: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.clone();
        out.set_column(k, column);
        out
    }
}

/// First coordinate of `c_p` to reach zero on the segment towards `c_u`,
/// lowest index on ties.
fn ratio_test(c_p: &[f64], c_u: &DVector<f64>, tol: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &cp) in c_p.iter().enumerate() {
        let cu = c_u[k];
        if cu >= -tol {
            continue;
        }
        let t = cp / (cp - cu);
        if best.is_none_or(|(_, b)| t < b) {
            best = Some((k, t));
        }
    }
    best
}

/// Scaled distance between the data and the walker, `‖Σ (c_u − c_p)_k col_k‖`
/// over the non-lineality columns.
fn residual_norm(basis: &TrackedInverse, c_u: &DVector<f64>, c_p: &[f64], n: usize, m: usize) -> f64 {
    let mut diff = DVector::zeros(n);
    for k in 0..m {
        diff[k] = c_u[k] - c_p[k];
    }
    (basis.matrix() * diff).norm()
}

fn edge_column(cone: &ConeSystem, k: usize, is_hinge: bool) -> Result<DVector<f64>> {
    Ok(if is_hinge {
        cone.dual_basis()?.column(k).into_owned()
    } else {
        cone.gamma(k)
    })
}

fn initial_basis(cone: &ConeSystem, hinge: &[bool]) -> Result<TrackedInverse> {
    let c = cone.gamma_matrix().clone();
    if hinge.iter().all(|h| !h) {
        let inv = -cone.dual_basis()?.transpose();
        return TrackedInverse::from_parts(c, inv, DEFAULT_REFRESH_PERIOD);
    }
    let b = cone.dual_basis()?;
    let mut mixed = c;
    for (k, &h) in hinge.iter().enumerate() {
        if h {
            mixed.set_column(k, &b.column(k));
        }
    }
    TrackedInverse::new(mixed)
}
