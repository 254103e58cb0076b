use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::trace::{IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step};

use super::dual_objective;

/// Consecutive dual-objective increases that count as divergence.
const DIVERGENCE_WINDOW: usize = 100;

/// Largest eigenvalue of `A W⁻¹ Aᵀ` by power iteration.
pub fn dual_lipschitz_constant(cone: &ConeSystem) -> f64 {
    let m = cone.m();
    let w = cone.w();
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    for (i, vi) in v.iter_mut().enumerate() {
        // Alternating signs excite the high-frequency end of the spectrum.
        if i % 2 == 1 {
            *vi = -*vi;
        }
    }
    let mut estimate = 0.0;
    for _ in 0..200 {
        let mut at = cone.apply_at(&v);
        for (a, wi) in at.iter_mut().zip(w) {
            *a /= wi;
        }
        let next = cone.apply_a(&at);
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let rayleigh: f64 = next.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = next.into_iter().map(|a| a / norm).collect();
        if (rayleigh - estimate).abs() <= 1e-12 * rayleigh.abs() {
            return rayleigh;
        }
        estimate = rayleigh;
    }
    estimate
}

/// Projected gradient ascent on the dual (Arrow–Hurwicz/Uzawa).
///
/// Alternates the closed-form primal minimiser `x = y − W⁻¹Aᵀμ` with
/// `μ <- max(0, μ + ρ A x)`. The default step is `1/L`, `L` the largest
/// eigenvalue of `A W⁻¹ Aᵀ`. A dual objective that keeps increasing for 100
/// consecutive iterations, or any non-finite iterate, aborts with
/// [`Error::Divergence`].
pub fn uzawa_solve(
    signal: &Signal,
    cone: &ConeSystem,
    ctl: &IterControl,
    rho: Option<f64>,
) -> Result<SolverTrace> {
    let rho = match rho {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) => return Err(Error::InvalidArgument(format!("step {r} must be positive"))),
        None => 1.0 / dual_lipschitz_constant(cone),
    };
    let m = cone.m();
    let y = signal.y();
    let mut mu = vec![0.0; m];
    let mut x = y.to_vec();
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut iteration = 0;
    let mut previous = dual_objective(cone, y, &x);
    let mut rising = 0;
    let termination = loop {
        let current = dual_objective(cone, y, &x);
        if let Step::Stop(t) = monitor.check(iteration, &x, &mu, Some(current)) {
            break t;
        }
        let ax = cone.apply_a(&x);
        for (u, g) in mu.iter_mut().zip(&ax) {
            *u = (*u + rho * g).max(0.0);
        }
        x = cone.primal_from_dual(y, &mu);
        iteration += 1;
        let value = dual_objective(cone, y, &x);
        if !value.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite iterate after {iteration} iterations with step {rho:e}"
            )));
        }
        rising = if value > previous { rising + 1 } else { 0 };
        if rising >= DIVERGENCE_WINDOW {
            return Err(Error::Divergence(format!(
                "dual objective increased for {DIVERGENCE_WINDOW} consecutive iterations with step {rho:e}"
            )));
        }
        previous = value;
    };
    let result = SolverResult::new(cone, y, x, mu, termination, iteration);
    Ok(monitor.finish(result, SolverStats::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::build_cone_system;
    use nalgebra::DMatrix;

    #[test]
    fn lipschitz_matches_dense_eigenvalue() {
        let s = Signal::new(
            vec![0.0, 1.0, 1.5, 3.0, 4.0, 4.2, 6.0],
            vec![0.0; 7],
            vec![1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 1.0],
        )
        .unwrap();
        let c = build_cone_system(&s);
        let a = c.a_dense();
        let winv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(7, s.w().iter().map(|v| 1.0 / v)));
        let h = &a * winv * a.transpose();
        let top = h.symmetric_eigenvalues().max();
        assert!((dual_lipschitz_constant(&c) - top).abs() < 1e-8 * top);
    }

    #[test]
    fn feasible_input_converges_immediately() {
        let s = Signal::uniform(vec![0.0, 1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let t = uzawa_solve(&s, &c, &IterControl::default(), None).unwrap();
        assert!(t.result.converged());
        assert_eq!(t.result.iterations, 0);
    }

    #[test]
    fn three_points_small_step() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let t = uzawa_solve(&s, &c, &IterControl::default(), Some(0.1)).unwrap();
        assert!(t.result.converged());
        assert!((t.result.lambda[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!(t.result.x.iter().all(|v| (v + 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn oversized_step_diverges() {
        let y = vec![0.3, -1.0, 2.0, 0.1, -0.5, 1.5, 0.0, -2.0, 1.0, 0.4];
        let s = Signal::uniform(y).unwrap();
        let c = build_cone_system(&s);
        let rho = 10.0 / dual_lipschitz_constant(&c);
        let err = uzawa_solve(&s, &c, &IterControl::default(), Some(rho)).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    #[test]
    fn rejects_nonpositive_step() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        assert!(uzawa_solve(&s, &c, &IterControl::default(), Some(0.0)).is_err());
    }
}
