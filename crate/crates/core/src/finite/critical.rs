use std::collections::HashMap;

use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::trace::{IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step};

use super::slack;

/// Nearest-point routine with critical-index deflation.
///
/// The polar part of the projection is the nearest point to the data in
/// `pos(γ⁰ … γ^{m−1})`, with all inner products taken in the weighted
/// metric. A critical index is one whose coefficient is positive at the
/// optimum; once found, its edge is a full line of the reduced problem, so
/// the data and the remaining edges are projected onto the orthogonal
/// complement of the critical edges and the search restarts one dimension
/// lower.
///
/// Each search starts at the nearest edge and reduces the distance by two-
/// vector projections while possible, falling back to projections onto the
/// span of the current face with a line search back into the face when a
/// coefficient turns nonpositive. A current point `x̄` with `(ū − x̄) ⟂ x̄`
/// and exactly one edge violating optimality identifies that edge as
/// critical.
pub fn critical_index_solve(signal: &Signal, cone: &ConeSystem, ctl: &IterControl) -> Result<SolverTrace> {
    let y = signal.y();
    let m = cone.m();
    let w = cone.w();
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut stats = SolverStats::default();

    let a_scale = cone
        .rows()
        .iter()
        .fold(0.0f64, |a, r| a.max(r[0].abs() + r[1].abs() + r[2].abs()));
    let tol = slack(y) * a_scale;
    let affine = cone.affine_fit(y);
    let u: Vec<f64> = y.iter().zip(&affine).map(|(a, b)| a - b).collect();
    let stall_cap = 20 * (m + 10);

    let mut critical = vec![false; m];
    'outer: loop {
        let u_bar = cone.project_equality_mask(&u, &critical)?.x;
        let free: Vec<usize> = (0..m).filter(|&i| !critical[i]).collect();
        let mut edges = ReducedEdges::new(cone, &critical);

        let au = cone.apply_a(&u_bar);
        let violators: Vec<usize> = free.iter().copied().filter(|&i| au[i] > tol).collect();
        match violators.len() {
            0 => return conclude(monitor, cone, y, &critical, stats),
            1 => {
                critical[violators[0]] = true;
                stats.deflations += 1;
                continue 'outer;
            }
            _ => {}
        }

        // Nearest edge among those making an acute angle with the data.
        let mut best: Option<(usize, f64)> = None;
        for &i in &violators {
            let g = edges.get(i)?;
            let score = au[i] * au[i] / dot_w(w, g, g);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (first, _) = best.expect("at least two violators");
        let g = edges.get(first)?.clone();
        let t = au[first] / dot_w(w, &g, &g);
        let mut x_bar: Vec<f64> = g.iter().map(|v| t * v).collect();
        let mut coef: HashMap<usize, f64> = HashMap::from([(first, t)]);
        let u_norm_sq = dot_w(w, &u_bar, &u_bar);

        for _ in 0..stall_cap {
            let r: Vec<f64> = u_bar.iter().zip(&x_bar).map(|(a, b)| a - b).collect();
            let ar = cone.apply_a(&r);
            let violators: Vec<usize> = free.iter().copied().filter(|&i| ar[i] > tol).collect();
            let face = face_mask(&critical, &coef);
            if let Some(term) = monitor.exhausted(stats.steps) {
                let p = cone.project_equality_mask(y, &face)?;
                let result = SolverResult::new(cone, y, p.x, p.lambda, term, stats.steps);
                return Ok(monitor.finish(result, stats));
            }
            if stats.steps > 0 && (stats.steps % ctl.trace_stride == 0 || ctl.reference.is_some()) {
                let p = cone.project_equality_mask(y, &face)?;
                let dist = dot_w(w, &r, &r).sqrt();
                if let Step::Stop(term) = monitor.check(stats.steps, &p.x, &p.lambda, Some(dist)) {
                    let result = SolverResult::new(cone, y, p.x, p.lambda, term, stats.steps);
                    return Ok(monitor.finish(result, stats));
                }
            }
            match violators.len() {
                0 => return conclude(monitor, cone, y, &face, stats),
                1 => {
                    critical[violators[0]] = true;
                    stats.deflations += 1;
                    continue 'outer;
                }
                _ => {}
            }
            stats.steps += 1;

            // Distance reduction onto pos{x̄, γ̄ⁱ}.
            let r_sq = dot_w(w, &r, &r);
            let xx = dot_w(w, &x_bar, &x_bar);
            let mut reduced = false;
            let mut order = violators.clone();
            order.sort_by(|&a, &b| ar[b].total_cmp(&ar[a]).then(a.cmp(&b)));
            for &i in order.iter().filter(|i| !coef.contains_key(i)) {
                let g = edges.get(i)?;
                let gg = dot_w(w, g, g);
                let ug = dot_w(w, &u_bar, g);
                let xg = dot_w(w, &x_bar, g);
                let det = xx * gg - xg * xg;
                let independent = det > 1e-12 * xx * gg;
                let closer = r_sq <= u_norm_sq - ug * ug / gg;
                if !(independent && (closer || ug <= 0.0)) {
                    continue;
                }
                let ux = dot_w(w, &u_bar, &x_bar);
                let a = (ux * gg - ug * xg) / det;
                let b = (ug * xx - ux * xg) / det;
                if a <= 0.0 || b <= 0.0 {
                    continue;
                }
                for (xv, gv) in x_bar.iter_mut().zip(g) {
                    *xv = a * *xv + b * gv;
                }
                for c in coef.values_mut() {
                    *c *= a;
                }
                *coef.entry(i).or_insert(0.0) += b;
                reduced = true;
                break;
            }
            if reduced {
                continue;
            }

            // Projection face search on the current support plus the worst
            // violator.
            face_search(cone, &u, &u_bar, &critical, &mut coef, &mut x_bar, None)?;
            let r: Vec<f64> = u_bar.iter().zip(&x_bar).map(|(a, b)| a - b).collect();
            let ar = cone.apply_a(&r);
            let worst = free
                .iter()
                .copied()
                .filter(|&i| ar[i] > tol)
                .max_by(|&a, &b| ar[a].total_cmp(&ar[b]).then(b.cmp(&a)));
            if let Some(i) = worst {
                face_search(cone, &u, &u_bar, &critical, &mut coef, &mut x_bar, Some(i))?;
            }
        }
        return Err(Error::Stalled(format!(
            "no critical index identified after {stall_cap} steps ({} critical so far, support {:?})",
            critical.iter().filter(|&&c| c).count(),
            {
                let mut s: Vec<usize> = coef.keys().copied().collect();
                s.sort_unstable();
                s
            }
        )));
    }
}

/// Lawson–Hanson style inner loop: project onto the span of the support
/// (optionally enlarged by `enter`) and walk back into the face whenever a
/// coefficient becomes nonpositive. On return `x̄` is the projection of `ū`
/// onto the span of its support and lies in the relative interior of the
/// face.
fn face_search(
    cone: &ConeSystem,
    u: &[f64],
    u_bar: &[f64],
    critical: &[bool],
    coef: &mut HashMap<usize, f64>,
    x_bar: &mut [f64],
    enter: Option<usize>,
) -> Result<()> {
    if let Some(i) = enter {
        coef.entry(i).or_insert(0.0);
    }
    let guard = coef.len() + 2;
    for _ in 0..guard {
        let mask = face_mask(critical, coef);
        let p = cone.project_equality_mask(u, &mask)?;
        let target: Vec<f64> = u_bar.iter().zip(&p.x).map(|(a, b)| a - b).collect();
        let scale = coef
            .keys()
            .fold(0.0f64, |a, &s| a.max(p.lambda[s].abs()));
        let floor = 1e-13 * scale.max(f64::MIN_POSITIVE);
        let blocking = coef
            .iter()
            .filter(|(&s, _)| p.lambda[s] <= floor)
            .map(|(&s, &c)| (s, c / (c - p.lambda[s])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((_, t)) = blocking else {
            for (&s, c) in coef.iter_mut() {
                *c = p.lambda[s];
            }
            x_bar.copy_from_slice(&target);
            return Ok(());
        };
        let t = t.clamp(0.0, 1.0);
        for (&s, c) in coef.iter_mut() {
            *c += t * (p.lambda[s] - *c);
        }
        for (xv, tv) in x_bar.iter_mut().zip(&target) {
            *xv += t * (tv - *xv);
        }
        let cmax = coef.values().fold(0.0f64, |a, c| a.max(c.abs()));
        let cut = floor.max(1e-14 * cmax);
        coef.retain(|_, c| *c > cut);
        if coef.is_empty() {
            x_bar.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
    }
    Err(Error::Stalled("projection face search did not settle".into()))
}

fn face_mask(critical: &[bool], coef: &HashMap<usize, f64>) -> Vec<bool> {
    let mut mask = critical.to_vec();
    for &s in coef.keys() {
        mask[s] = true;
    }
    mask
}

fn conclude(
    mut monitor: Monitor<'_>,
    cone: &ConeSystem,
    y: &[f64],
    saturated: &[bool],
    stats: SolverStats,
) -> Result<SolverTrace> {
    let p = cone.project_equality_mask(y, saturated)?;
    let term = monitor.conclude(stats.steps, &p.x, &p.lambda, None);
    let result = SolverResult::new(cone, y, p.x, p.lambda, term, stats.steps);
    Ok(monitor.finish(result, stats))
}

/// Edges `W⁻¹A_iᵀ` projected onto the complement of the critical edges,
/// computed on demand.
struct ReducedEdges<'a> {
    cone: &'a ConeSystem,
    critical: &'a [bool],
    cache: HashMap<usize, Vec<f64>>,
}

impl<'a> ReducedEdges<'a> {
    fn new(cone: &'a ConeSystem, critical: &'a [bool]) -> Self {
        Self {
            cone,
            critical,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, i: usize) -> Result<&Vec<f64>> {
        if !self.cache.contains_key(&i) {
            let mut g = vec![0.0; self.cone.n()];
            let r = self.cone.row(i);
            for k in 0..3 {
                g[i + k] = r[k] / self.cone.w()[i + k];
            }
            let g = if self.critical.iter().any(|&c| c) {
                self.cone.project_equality_mask(&g, self.critical)?.x
            } else {
                g
            };
            self.cache.insert(i, g);
        }
        Ok(&self.cache[&i])
    }
}

fn dot_w(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((wi, x), y)| wi * x * y).sum()
}
