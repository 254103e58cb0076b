use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::kernels::BandedMatrix;
use crate::signal::Signal;
use crate::trace::{IterControl, Monitor, SolverResult, SolverStats, SolverTrace, Step};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    /// Augmented-Lagrangian penalty index `γ`.
    pub gamma: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self { gamma: 1.0 }
    }
}

/// Alternating direction method of multipliers on the split
/// `min ‖y − x‖²_W + ι(z <= 0)  s.t.  A x = z`.
///
/// With scaled dual `λ` the updates are
///
/// ```text
/// (2W + AᵀA/γ) x = 2W y + Aᵀ(z − λ)/γ     (banded, factor cached)
/// z = min(0, A x + λ)
/// λ <- λ + A x − z
/// ```
///
/// and the multiplier in the `½‖x − y‖²_W + μᵀAx` convention is
/// `μ = λ / (2γ)`. Starts from `x = y`, `z = min(0, Ay)`, `λ = 0`.
pub fn admm_solve(
    signal: &Signal,
    cone: &ConeSystem,
    ctl: &IterControl,
    options: &AdmmOptions,
) -> Result<SolverTrace> {
    let gamma = options.gamma;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty {gamma} must be positive")));
    }
    let n = cone.n();
    let m = cone.m();
    let y = signal.y();
    let w = cone.w();
    let mut system = BandedMatrix::zeros(n, 2)?;
    for k in 0..n {
        system.add(k, k, 2.0 * w[k])?;
    }
    for i in 0..m {
        let a = cone.row(i);
        for p in 0..3 {
            for q in 0..=p {
                system.add(i + p, i + q, a[p] * a[q] / gamma)?;
            }
        }
    }
    let factor = system.cholesky()?;
    let two_wy: Vec<f64> = y.iter().zip(w).map(|(a, b)| 2.0 * a * b).collect();

    let mut x = y.to_vec();
    let mut z: Vec<f64> = cone.apply_a(y).into_iter().map(|v| v.min(0.0)).collect();
    let mut scaled = vec![0.0; m];
    let mut mu = vec![0.0; m];
    let mut coupling = coupling_residual(&cone.apply_a(&x), &z);
    let mut monitor = Monitor::new(ctl, cone, y)?;
    let mut iteration = 0;
    let termination = loop {
        if let Step::Stop(t) = monitor.check(iteration, &x, &mu, Some(coupling)) {
            break t;
        }
        let diff: Vec<f64> = z.iter().zip(&scaled).map(|(a, b)| (a - b) / gamma).collect();
        let at = cone.apply_at(&diff);
        let mut rhs: Vec<f64> = two_wy.iter().zip(&at).map(|(a, b)| a + b).collect();
        factor.solve_in_place(&mut rhs);
        x = rhs;
        let ax = cone.apply_a(&x);
        for i in 0..m {
            z[i] = (ax[i] + scaled[i]).min(0.0);
            scaled[i] += ax[i] - z[i];
            mu[i] = scaled[i] / (2.0 * gamma);
        }
        coupling = coupling_residual(&ax, &z);
        iteration += 1;
    };
    let result = SolverResult::new(cone, y, x, mu, termination, iteration);
    Ok(monitor.finish(result, SolverStats::default()))
}

fn coupling_residual(ax: &[f64], z: &[f64]) -> f64 {
    ax.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::build_cone_system;

    #[test]
    fn feasible_input_is_fixed() {
        let s = Signal::uniform(vec![0.0, 1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let t = admm_solve(&s, &c, &IterControl::default(), &AdmmOptions::default()).unwrap();
        assert!(t.result.converged());
        assert_eq!(t.result.x, s.y());
    }

    #[test]
    fn three_points() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let t = admm_solve(&s, &c, &IterControl::default(), &AdmmOptions::default()).unwrap();
        assert!(t.result.converged());
        assert!(t.result.x.iter().all(|v| (v + 1.0 / 3.0).abs() < 1e-9));
        assert!((t.result.lambda[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!(t.samples.last().unwrap().monitor.unwrap() <= 1e-8);
    }

    #[test]
    fn zero_iterations_reports_start() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let ctl = IterControl::default().with_max_iterations(0);
        let t = admm_solve(&s, &c, &ctl, &AdmmOptions::default()).unwrap();
        assert!(!t.result.converged());
        assert_eq!(t.result.x, s.y());
    }
}
