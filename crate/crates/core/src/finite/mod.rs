//! Active-set solvers with finite termination.
//!
//! Index conventions: a *hinge* is a constraint left free (not saturated);
//! the complement of the hinge set is the saturated set. Every solver
//! finishes by re-solving the equality-constrained projection on its final
//! saturated set, which yields exact multipliers.

mod block;
mod critical;
mod meyer;
mod mpdb;

pub use block::{block_active_set_solve, BlockPartition};
pub use critical::critical_index_solve;
pub use meyer::meyer_solve;
pub use mpdb::mpdb_solve;

use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::warmstart::pav_warm_start;

/// Boundary slack of the relative-interior tests, relative to the data scale.
pub const INTERIOR_SLACK: f64 = 1e-10;

/// Starting information for an active-set solver.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// No hinges: every constraint saturated, the start is the affine fit.
    #[default]
    Empty,
    /// Every constraint a hinge.
    Full,
    /// Hinges and starting point from the greedy saturation warm start.
    Pav,
    /// Explicit hinge set.
    Hinges(Vec<usize>),
    /// Feasible starting point; its strictly inactive constraints are the
    /// hinges.
    Point(Vec<f64>),
}

/// Hinge mask and optional feasible point described by an [`Init`].
pub(crate) struct Start {
    pub hinge: Vec<bool>,
    pub point: Option<Vec<f64>>,
}

pub(crate) fn resolve_init(signal: &Signal, cone: &ConeSystem, init: &Init) -> Result<Start> {
    let m = cone.m();
    Ok(match init {
        Init::Empty => Start {
            hinge: vec![false; m],
            point: None,
        },
        Init::Full => Start {
            hinge: vec![true; m],
            point: None,
        },
        Init::Pav => {
            let ws = pav_warm_start(signal, cone)?;
            let mut hinge = vec![true; m];
            for &i in &ws.saturated {
                hinge[i] = false;
            }
            Start {
                hinge,
                point: Some(ws.x),
            }
        }
        Init::Hinges(j) => {
            let mask = cone.saturation_mask(j)?;
            Start {
                hinge: mask,
                point: None,
            }
        }
        Init::Point(x) => {
            if x.len() != cone.n() {
                return Err(Error::InvalidArgument("starting point has the wrong length".into()));
            }
            let tol = slack(signal.y());
            if cone.max_violation(x) > tol {
                return Err(Error::InvalidArgument("starting point is not feasible".into()));
            }
            Start {
                hinge: cone.apply_a(x).iter().map(|&v| v < -tol).collect(),
                point: Some(x.clone()),
            }
        }
    })
}

/// Absolute slack used for sign decisions on data `y`.
pub(crate) fn slack(y: &[f64]) -> f64 {
    INTERIOR_SLACK * y.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

pub(crate) fn complement(mask: &[bool]) -> Vec<bool> {
    mask.iter().map(|b| !b).collect()
}

pub(crate) fn indices(mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i]).collect()
}

/// Index of the largest value above `threshold`, lowest index on ties
/// within `1e-12` relative.
pub(crate) fn argmax_above(values: impl Iterator<Item = (usize, f64)>, threshold: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if v <= threshold {
            continue;
        }
        match best {
            Some((_, b)) if v <= b + 1e-12 * b.abs().max(1.0) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        let v = [0.5, 2.0, 2.0 + 1e-14, 1.0];
        assert_eq!(argmax_above(v.iter().copied().enumerate(), 0.0), Some(1));
        assert_eq!(argmax_above(v.iter().copied().enumerate(), 3.0), None);
    }
}
