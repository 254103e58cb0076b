use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::trace::{IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step};

/// Relaxation parameters `λ_k` of the product-space iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Relaxation {
    Constant(f64),
    /// `λ_k` for `k = 0, 1, …`; the last entry repeats.
    Schedule(Vec<f64>),
}

impl Relaxation {
    fn at(&self, k: usize) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Schedule(s) => s[k.min(s.len() - 1)],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Self::Constant(v) => std::slice::from_ref(v),
            Self::Schedule(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LspsOptions {
    pub relaxation: Relaxation,
    /// Permit relaxation values above 2.
    pub allow_over_relaxation: bool,
    /// Weight `t` of the data term in each copy's proximal step, as a
    /// multiple of the number of copies. `1.0` splits the data term evenly.
    pub prox_weight: f64,
}

impl Default for LspsOptions {
    fn default() -> Self {
        Self {
            relaxation: Relaxation::Constant(1.0),
            allow_over_relaxation: false,
            prox_weight: 1.0,
        }
    }
}

/// Relaxed product-space splitting.
///
/// The problem is lifted to `m` copies `x_1..x_m`, copy `i` constrained to
/// `K_i`, with the diagonal subspace `D = {x_1 = … = x_m}` enforcing
/// consensus. Each iteration applies the reflected step
///
/// ```text
/// X = P_D(V),  Z = prox_F(2X − V),  V <- V + λ_k (Z − X)
/// ```
///
/// where `P_D` averages the copies and `prox_F` projects each copy onto its
/// `K_i` after blending with `y`. A plain average of projections would only
/// find some point of `K`; the data term in `F` makes the fixed point the
/// projection of `y`.
///
/// Every copy differs from a shared vector by a multiple of `W⁻¹A_iᵀ`, so
/// the state is one shared vector plus one scalar per constraint and an
/// iteration costs `O(n)`. The reported primal iterate is the average `X`.
pub fn lsps_solve(
    signal: &Signal,
    cone: &ConeSystem,
    ctl: &IterControl,
    options: &LspsOptions,
) -> Result<SolverTrace> {
    let values = options.relaxation.values();
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty relaxation schedule".into()));
    }
    for &v in values {
        let upper_ok = v <= 2.0 || options.allow_over_relaxation;
        if !(v > 0.0 && v.is_finite() && upper_ok) {
            return Err(Error::InvalidArgument(format!(
                "relaxation {v} outside (0, 2]; over-relaxation is disabled"
            )));
        }
    }
    if !(options.prox_weight > 0.0 && options.prox_weight.is_finite()) {
        return Err(Error::InvalidArgument("proximal weight must be positive".into()));
    }
    let m = cone.m();
    let n = cone.n();
    let mf = m as f64;
    let t = options.prox_weight * mf;
    let alpha = t / (t + mf);
    let dual_scale = (t + mf) / (mf * t);
    let y = signal.y();
    let w = cone.w();
    let norms: Vec<f64> = (0..m).map(|i| cone.row_weighted_norm_sq(i)).collect();
    let ay = cone.apply_a(y);

    // Copy i is `shared − s_i W⁻¹A_iᵀ`.
    let mut shared = y.to_vec();
    let mut s = vec![0.0; m];
    let mut nu = vec![0.0; m];
    let mut x = y.to_vec();
    let mut lambda = vec![0.0; m];
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut iteration = 0;
    let termination = loop {
        if let Step::Stop(term) = monitor.check(iteration, &x, &lambda, None) {
            break term;
        }
        let relax = options.relaxation.at(iteration);
        for i in 0..m {
            let a_xbar = cone.row_dot(i, &x);
            let a_shared = cone.row_dot(i, &shared);
            let a_c = alpha * ay[i] + (1.0 - alpha) * (2.0 * a_xbar - a_shared + s[i] * norms[i]);
            nu[i] = (a_c / norms[i]).max(0.0);
        }
        // Common part of Z − X.
        for k in 0..n {
            shared[k] += relax * (alpha * (y[k] - x[k]) + (1.0 - alpha) * (x[k] - shared[k]));
        }
        for i in 0..m {
            s[i] += relax * (nu[i] - (1.0 - alpha) * s[i]);
        }
        let scaled: Vec<f64> = s.iter().map(|v| v / mf).collect();
        let at = cone.apply_at(&scaled);
        for k in 0..n {
            x[k] = shared[k] - at[k] / w[k];
        }
        for i in 0..m {
            lambda[i] = nu[i] * dual_scale;
        }
        iteration += 1;
    };
    let result = SolverResult::new(cone, y, x, lambda, termination, iteration);
    Ok(monitor.finish(result, SolverStats::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::build_cone_system;

    #[test]
    fn feasible_input_is_fixed() {
        let s = Signal::uniform(vec![0.0, 1.0, 0.5, -1.0]).unwrap();
        let c = build_cone_system(&s);
        let t = lsps_solve(&s, &c, &IterControl::default(), &LspsOptions::default()).unwrap();
        assert!(t.result.converged());
        assert_eq!(t.result.x, s.y());
    }

    #[test]
    fn three_points() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let t = lsps_solve(&s, &c, &IterControl::default(), &LspsOptions::default()).unwrap();
        assert!(t.result.converged());
        assert!(t.result.x.iter().all(|v| (v + 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_over_relaxation_unless_enabled() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let mut o = LspsOptions {
            relaxation: Relaxation::Constant(2.5),
            ..LspsOptions::default()
        };
        let ctl = IterControl::default().with_max_iterations(10);
        assert!(lsps_solve(&s, &c, &ctl, &o).is_err());
        o.allow_over_relaxation = true;
        assert!(lsps_solve(&s, &c, &ctl, &o).is_ok());
        o.relaxation = Relaxation::Schedule(vec![]);
        assert!(lsps_solve(&s, &c, &ctl, &o).is_err());
    }
}
