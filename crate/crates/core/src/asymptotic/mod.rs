//! Iterative solvers that converge in the limit.
//!
//! All five share the [`IterControl`](crate::trace::IterControl) contract:
//! they stop on a passing KKT certificate, on reaching a supplied reference,
//! or on exhausting the iteration cap or CPU budget. Budget exhaustion is not
//! an error; the final iterate is returned with its certificate.

mod admm;
mod dykstra;
mod hildreth;
mod lsps;
mod uzawa;

pub use admm::{admm_solve, AdmmOptions};
pub use dykstra::dykstra_solve;
pub use hildreth::hildreth_solve;
pub use lsps::{lsps_solve, LspsOptions, Relaxation};
pub use uzawa::{dual_lipschitz_constant, uzawa_solve};

use crate::cone::ConeSystem;

/// Weighted projection of the three points `i, i+1, i+2` onto the single
/// constraint `A_i x <= 0`. Returns the projected values and the multiplier.
///
/// When the constraint is violated this is the weighted straight-line fit of
/// the three points.
pub(crate) fn project_single(cone: &ConeSystem, i: usize, v: [f64; 3]) -> ([f64; 3], f64) {
    let a = cone.row(i);
    let dot = a[0] * v[0] + a[1] * v[1] + a[2] * v[2];
    if dot <= 0.0 {
        return (v, 0.0);
    }
    let w = cone.w();
    let mu = dot / cone.row_weighted_norm_sq(i);
    (
        [
            v[0] - mu * a[0] / w[i],
            v[1] - mu * a[1] / w[i + 1],
            v[2] - mu * a[2] / w[i + 2],
        ],
        mu,
    )
}

pub(crate) fn local(x: &[f64], i: usize) -> [f64; 3] {
    [x[i], x[i + 1], x[i + 2]]
}

/// `½‖W⁻¹Aᵀλ‖²_W − λᵀA y`, written as `½‖x‖²_W − ½‖y‖²_W` with
/// `x = y − W⁻¹Aᵀλ`. Minimised by the optimal multipliers.
pub(crate) fn dual_objective(cone: &ConeSystem, y: &[f64], x: &[f64]) -> f64 {
    cone.w()
        .iter()
        .zip(x)
        .zip(y)
        .map(|((w, a), b)| 0.5 * w * (a * a - b * b))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{build_cone_system, WeightedLine};
    use crate::signal::Signal;

    #[test]
    fn single_projection_is_three_point_line_fit() {
        let s = Signal::new(
            vec![0.0, 0.5, 2.0, 2.5],
            vec![1.0, -3.0, 2.0, 0.5],
            vec![0.5, 2.0, 1.5, 1.0],
        )
        .unwrap();
        let c = build_cone_system(&s);
        for i in 0..c.m() {
            let v = local(s.y(), i);
            let (p, mu) = project_single(&c, i, v);
            if c.row_dot(i, s.y()) > 0.0 {
                let line = WeightedLine::fit(&s.z()[i..i + 3], &v, &s.w()[i..i + 3]);
                for k in 0..3 {
                    assert!((p[k] - line.eval(s.z()[i + k])).abs() < 1e-14);
                }
                assert!(mu > 0.0);
            } else {
                assert_eq!(p, v);
            }
        }
    }

    #[test]
    fn single_projection_matches_equality_projection() {
        let s = Signal::new(vec![0.0, 1.0, 3.0], vec![0.0, -1.0, 0.5], vec![1.0, 3.0, 2.0]).unwrap();
        let c = build_cone_system(&s);
        let (p, mu) = project_single(&c, 0, local(s.y(), 0));
        let eq = c.project_equality(s.y(), &[0]).unwrap();
        for k in 0..3 {
            assert!((p[k] - eq.x[k]).abs() < 1e-14);
        }
        assert!((mu - eq.lambda[0]).abs() < 1e-14);
    }
}
