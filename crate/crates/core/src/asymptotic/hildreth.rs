use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::trace::{IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step};

use super::dual_objective;

/// Cyclic coordinate descent on the dual.
///
/// Each coordinate step minimises the dual exactly in `λ_i` and clamps:
/// `λ_i <- max(0, λ_i + A_i x / (A_i W⁻¹ A_iᵀ))`, with `x = y − W⁻¹Aᵀλ`
/// updated locally. One iteration is one sweep over `order` (default
/// `0..m`). Starts from `λ = 0`.
pub fn hildreth_solve(
    signal: &Signal,
    cone: &ConeSystem,
    ctl: &IterControl,
    order: Option<&[usize]>,
) -> Result<SolverTrace> {
    let m = cone.m();
    let order: Vec<usize> = match order {
        Some(o) => {
            let mut seen = vec![false; m];
            if o.len() != m || o.iter().any(|&i| i >= m || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::InvalidArgument(
                    "sweep order must be a permutation of the constraint indices".into(),
                ));
            }
            o.to_vec()
        }
        None => (0..m).collect(),
    };
    let y = signal.y();
    let w = cone.w();
    let norms: Vec<f64> = (0..m).map(|i| cone.row_weighted_norm_sq(i)).collect();
    let mut lambda = vec![0.0; m];
    let mut x = y.to_vec();
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut iteration = 0;
    let termination = loop {
        if let Step::Stop(t) = monitor.check(iteration, &x, &lambda, Some(dual_objective(cone, y, &x))) {
            break t;
        }
        for &i in &order {
            let a = cone.row(i);
            let target = (lambda[i] + cone.row_dot(i, &x) / norms[i]).max(0.0);
            let delta = target - lambda[i];
            if delta != 0.0 {
                x[i] -= delta * a[0] / w[i];
                x[i + 1] -= delta * a[1] / w[i + 1];
                x[i + 2] -= delta * a[2] / w[i + 2];
                lambda[i] = target;
            }
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
        let s = Signal::uniform(vec![0.0, 1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let t = hildreth_solve(&s, &c, &IterControl::default(), None).unwrap();
        assert!(t.result.converged());
        assert_eq!(t.result.x, s.y());
        assert_eq!(t.result.lambda, vec![0.0]);
    }

    #[test]
    fn three_points_in_one_sweep() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let t = hildreth_solve(&s, &c, &IterControl::default(), None).unwrap();
        assert!(t.result.converged());
        assert!(t.result.iterations <= 3);
        assert!((t.result.lambda[0] - 1.0 / 3.0).abs() < 1e-10);
        assert!(t.result.x.iter().all(|v| (v + 1.0 / 3.0).abs() < 1e-10));
    }

    #[test]
    fn rejects_bad_order() {
        let s = Signal::uniform(vec![0.0; 5]).unwrap();
        let c = build_cone_system(&s);
        let ctl = IterControl::default();
        assert!(hildreth_solve(&s, &c, &ctl, Some(&[0, 0, 1])).is_err());
        assert!(hildreth_solve(&s, &c, &ctl, Some(&[0, 1])).is_err());
        assert!(hildreth_solve(&s, &c, &ctl, Some(&[2, 1, 0])).is_ok());
    }

    #[test]
    fn dual_objective_never_increases() {
        let y = vec![0.3, -1.0, 2.0, 0.1, -0.5, 1.5, 0.0, -2.0, 1.0, 0.4];
        let s = Signal::uniform(y).unwrap();
        let c = build_cone_system(&s);
        let t = hildreth_solve(&s, &c, &IterControl::default().with_max_iterations(500), None).unwrap();
        for pair in t.samples.windows(2) {
            assert!(pair[1].monitor.unwrap() <= pair[0].monitor.unwrap() + 1e-12);
        }
        assert!(t.result.lambda.iter().all(|&l| l >= 0.0));
    }
}
