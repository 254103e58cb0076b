use std::ops::Range;

use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::kernels::BandedSystem;
use crate::signal::Signal;
use crate::trace::{IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step};
use crate::warmstart::pav_warm_start;

use super::{indices, slack, Init};

/// Piecewise-affine fit induced by a hinge set.
///
/// A hinge `h` places a breakpoint at point `h + 1`. Block `b` covers the
/// points `starts[b] .. starts[b+1]` and fits `x = a_b + s_b (z − z_{starts[b]})`;
/// consecutive lines meet at the first point of the next block. The
/// interleaved unknowns `(a_b, s_b, μ_b)` of the `3k − 1` KKT system form a
/// matrix with two sub- and two super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    starts: Vec<usize>,
    n: usize,
    /// Intercepts `a_b`, one per block.
    pub intercepts: Vec<f64>,
    /// Slopes `s_b`, one per block.
    pub slopes: Vec<f64>,
    /// Multipliers of the `k − 1` continuity constraints.
    pub continuity: Vec<f64>,
}

impl BlockPartition {
    /// Least-squares fit for the hinge set `hinges` (sorted, in range).
    pub fn solve(cone: &ConeSystem, y: &[f64], hinges: &[usize]) -> Result<Self> {
        let n = cone.n();
        if y.len() != n {
            return Err(Error::InvalidArgument("data has the wrong length".into()));
        }
        if hinges.windows(2).any(|p| p[0] >= p[1]) || hinges.last().is_some_and(|&h| h >= cone.m()) {
            return Err(Error::InvalidArgument("hinges must be sorted, distinct and in range".into()));
        }
        let z = cone.z();
        let w = cone.w();
        let mut starts = Vec::with_capacity(hinges.len() + 2);
        starts.push(0);
        starts.extend(hinges.iter().map(|h| h + 1));
        let k = starts.len();
        starts.push(n);

        let size = 3 * k - 1;
        let mut sys = BandedSystem::new(size, 2, 2);
        let mut rhs = vec![0.0; size];
        for b in 0..k {
            let (lo, hi) = (starts[b], starts[b + 1]);
            let (mut s0, mut s1, mut s2, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in lo..hi {
                let t = z[i] - z[lo];
                s0 += w[i];
                s1 += w[i] * t;
                s2 += w[i] * t * t;
                r0 += w[i] * y[i];
                r1 += w[i] * t * y[i];
            }
            let (ia, is) = (3 * b, 3 * b + 1);
            sys.add(ia, ia, s0)?;
            sys.add(ia, is, s1)?;
            sys.add(is, ia, s1)?;
            sys.add(is, is, s2)?;
            rhs[ia] = r0;
            rhs[is] = r1;
            if b + 1 < k {
                let im = 3 * b + 2;
                let span = z[hi] - z[lo];
                let next = 3 * (b + 1);
                for (col, v) in [(ia, 1.0), (is, span), (next, -1.0)] {
                    sys.add(im, col, v)?;
                    sys.add(col, im, v)?;
                }
            }
        }
        sys.solve(&mut rhs)?;
        Ok(Self {
            intercepts: (0..k).map(|b| rhs[3 * b]).collect(),
            slopes: (0..k).map(|b| rhs[3 * b + 1]).collect(),
            continuity: (0..k - 1).map(|b| rhs[3 * b + 2]).collect(),
            starts,
            n,
        })
    }

    /// Number of blocks `k`.
    pub fn len(&self) -> usize {
        self.intercepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intercepts.is_empty()
    }

    pub fn blocks(&self) -> Vec<Range<usize>> {
        self.starts.windows(2).map(|p| p[0]..p[1]).collect()
    }

    /// Size of the KKT system, `3k − 1`.
    pub fn system_size(&self) -> usize {
        3 * self.len() - 1
    }

    /// Fitted values at every point.
    pub fn fit(&self, z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (b, r) in self.blocks().into_iter().enumerate() {
            let z0 = z[r.start];
            for i in r {
                x[i] = self.intercepts[b] + self.slopes[b] * (z[i] - z0);
            }
        }
        x
    }
}

/// Primal active-set method on block partitions.
///
/// The iterate stays feasible. Each step solves the `3k − 1` system of the
/// current hinge set; if that fit breaks a hinge constraint the iterate moves
/// towards it until the first hinge closes (two blocks merge), otherwise the
/// fit is accepted and the saturated constraint with the most negative
/// multiplier is opened (a block splits). Non-uniform abscissae are handled
/// by working in `z` rather than in the point index.
///
/// Start points: `Empty` uses the affine fit, `Pav` and `Point` their
/// feasible point; `Full` and `Hinges` use the fit of that hinge set when it
/// is feasible and the affine fit otherwise.
pub fn block_active_set_solve(
    signal: &Signal,
    cone: &ConeSystem,
    ctl: &IterControl,
    init: &Init,
) -> Result<SolverTrace> {
    let y = signal.y();
    let z = cone.z();
    let m = cone.m();
    let tol = slack(y);
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut stats = SolverStats::default();

    let (mut x, mut hinge) = start(signal, cone, init, tol)?;
    let moment_scale = moment_scale(cone, y);

    loop {
        let fit = BlockPartition::solve(cone, y, &indices(&hinge))?;
        let x_p = fit.fit(z);
        check_moments(cone, y, &x_p, moment_scale)?;
        let ax_p = cone.apply_a(&x_p);
        let ax = cone.apply_a(&x);

        let blocking = (0..m)
            .filter(|&j| hinge[j] && ax_p[j] > tol)
            .map(|j| (j, ax[j] / (ax[j] - ax_p[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

        if let Some((j, t)) = blocking {
            if let Some(term) = monitor.exhausted(stats.steps) {
                let lambda = cone.multipliers_from_residual(y, &x);
                return Ok(finish(monitor, cone, y, x, lambda, term, stats));
            }
            let t = t.clamp(0.0, 1.0);
            for (xi, pi) in x.iter_mut().zip(&x_p) {
                *xi += t * (pi - *xi);
            }
            let ax = cone.apply_a(&x);
            hinge[j] = false;
            for (i, h) in hinge.iter_mut().enumerate() {
                if *h && ax[i] >= -tol * 1e-3 {
                    *h = false;
                }
            }
            stats.steps += 1;
            continue;
        }

        x = x_p;
        let mut lambda = cone.multipliers_from_residual(y, &x);
        for (l, &h) in lambda.iter_mut().zip(&hinge) {
            if h {
                *l = 0.0;
            }
        }
        let split = (0..m)
            .filter(|&i| !hinge[i] && lambda[i] < -tol)
            .min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]).then(a.cmp(&b)));
        let Some(i) = split else {
            let term = monitor.conclude(stats.steps, &x, &lambda, Some(fit.len() as f64));
            return Ok(finish(monitor, cone, y, x, lambda, term, stats));
        };
        if let Step::Stop(term) = monitor.check(stats.steps, &x, &lambda, Some(fit.len() as f64)) {
            return Ok(finish(monitor, cone, y, x, lambda, term, stats));
        }
        hinge[i] = true;
        stats.steps += 1;
    }
}

fn start(signal: &Signal, cone: &ConeSystem, init: &Init, tol: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    let y = signal.y();
    let m = cone.m();
    let affine = || (cone.affine_fit(y), vec![false; m]);
    let from_point = |x: Vec<f64>| {
        let ax = cone.apply_a(&x);
        let hinge = ax.iter().map(|&v| v < -tol).collect();
        (x, hinge)
    };
    Ok(match init {
        Init::Empty => affine(),
        Init::Pav => from_point(pav_warm_start(signal, cone)?.x),
        Init::Point(x) => {
            if x.len() != cone.n() || cone.max_violation(x) > tol {
                return Err(Error::InvalidArgument("starting point must be feasible".into()));
            }
            from_point(x.clone())
        }
        Init::Full | Init::Hinges(_) => {
            let hinges: Vec<usize> = match init {
                Init::Hinges(h) => {
                    let mut h = h.clone();
                    h.sort_unstable();
                    h.dedup();
                    h
                }
                _ => (0..m).collect(),
            };
            let x = BlockPartition::solve(cone, y, &hinges)?.fit(cone.z());
            if cone.max_violation(&x) <= tol {
                let mut mask = vec![false; m];
                for h in hinges {
                    mask[h] = true;
                }
                (x, mask)
            } else {
                affine()
            }
        }
    })
}

fn moment_scale(cone: &ConeSystem, y: &[f64]) -> f64 {
    let z = cone.z();
    let w = cone.w();
    let zmax = z.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let ysum: f64 = y.iter().zip(w).map(|(a, b)| (a * b).abs()).sum();
    ysum.max(1.0) * zmax
}

/// Residuals of any fit containing the affine functions are orthogonal to
/// `1` and `z`; a failure signals a broken linear solve.
fn check_moments(cone: &ConeSystem, y: &[f64], x: &[f64], scale: f64) -> Result<()> {
    let (mut m0, mut m1) = (0.0, 0.0);
    for i in 0..x.len() {
        let r = cone.w()[i] * (y[i] - x[i]);
        m0 += r;
        m1 += r * cone.z()[i];
    }
    if m0.abs().max(m1.abs()) > 1e-8 * scale {
        return Err(Error::Singular(format!(
            "block system residual moments ({m0:.3e}, {m1:.3e}) are not zero"
        )));
    }
    Ok(())
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
