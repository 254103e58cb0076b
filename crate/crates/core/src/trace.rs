//! Iteration control, traces and results shared by every solver.

use serde::{Deserialize, Serialize};

use crate::cone::{ConeSystem, KktCertificate};
use crate::error::{Error, Result};

/// CPU time consumed by the calling thread, in seconds.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Stopwatch over [`thread_cpu_seconds`].
#[derive(Debug, Clone, Copy)]
pub struct CpuClock {
    start: f64,
}

impl CpuClock {
    pub fn start() -> Self {
        Self {
            start: thread_cpu_seconds(),
        }
    }

    pub fn elapsed(&self) -> f64 {
        (thread_cpu_seconds() - self.start).max(0.0)
    }
}

/// Limits and stopping rule of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct IterControl {
    /// Iteration cap. Zero evaluates the starting iterate only and never
    /// declares convergence.
    pub max_iterations: usize,
    /// Thread CPU time budget in seconds.
    pub cpu_budget: Option<f64>,
    /// Threshold on the largest KKT residual, or on the L2 distance to
    /// `reference` when one is supplied.
    pub stop_tolerance: f64,
    /// Record every `trace_stride`-th iterate (the last one is always kept).
    pub trace_stride: usize,
    /// Known solution used for distance tracking and early stopping.
    pub reference: Option<Vec<f64>>,
    /// Stop iterative methods as soon as the certificate passes. Turning it
    /// off leaves only the reference distance, the iteration cap and the
    /// budget, which is how distance curves are recorded.
    pub stop_on_certificate: bool,
}

impl Default for IterControl {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
            cpu_budget: None,
            stop_tolerance: 1e-10,
            trace_stride: 1,
            reference: None,
            stop_on_certificate: true,
        }
    }
}

impl IterControl {
    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_budget(mut self, seconds: f64) -> Self {
        self.cpu_budget = Some(seconds);
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.stop_tolerance = tol;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.trace_stride = stride;
        self
    }

    pub fn with_reference(mut self, reference: Vec<f64>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_certificate_stop(mut self, enabled: bool) -> Self {
        self.stop_on_certificate = enabled;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.stop_tolerance > 0.0) || !self.stop_tolerance.is_finite() {
            return Err(Error::InvalidArgument("stop tolerance must be positive".into()));
        }
        if self.trace_stride == 0 {
            return Err(Error::InvalidArgument("trace stride must be at least 1".into()));
        }
        if let Some(b) = self.cpu_budget {
            if !(b >= 0.0) {
                return Err(Error::InvalidArgument("CPU budget must be nonnegative".into()));
            }
        }
        if let Some(r) = &self.reference {
            if r.len() != n {
                return Err(Error::InvalidArgument("reference has the wrong length".into()));
            }
        }
        Ok(())
    }
}

/// Why a solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The KKT certificate passed at the stop tolerance.
    Converged,
    /// Within the stop tolerance of the supplied reference, certificate not
    /// necessarily passing.
    ReferenceReached,
    IterationLimit,
    TimeBudget,
    /// A finite method finished its combinatorial search but the polished
    /// solution misses the stop tolerance.
    Inexact,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::ReferenceReached => "reference_reached",
            Self::IterationLimit => "iteration_limit",
            Self::TimeBudget => "time_budget",
            Self::Inexact => "inexact",
        }
    }
}

/// One recorded iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub iteration: usize,
    pub cpu_seconds: f64,
    /// `‖x − y‖²_W`.
    pub objective: f64,
    pub kkt: KktCertificate,
    /// `‖x − reference‖₂` when a reference is known.
    pub distance: Option<f64>,
    /// Method-specific monitored quantity: the dual objective for dual
    /// methods, `‖u − xᵏ‖` for the mixed-basis walk, the coupling residual
    /// `‖Ax − z‖₂` for ADMM.
    pub monitor: Option<f64>,
}

/// Final answer of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub x: Vec<f64>,
    /// Length `m`.
    pub lambda: Vec<f64>,
    /// Constraints with strictly positive multiplier.
    pub active_set: Vec<usize>,
    pub termination: Termination,
    pub certificate: KktCertificate,
    pub iterations: usize,
}

impl SolverResult {
    pub fn new(
        cone: &ConeSystem,
        y: &[f64],
        x: Vec<f64>,
        lambda: Vec<f64>,
        termination: Termination,
        iterations: usize,
    ) -> Self {
        let certificate = cone.kkt_certificate(y, &x, &lambda);
        let active_set = active_indices(&lambda);
        Self {
            x,
            lambda,
            active_set,
            termination,
            certificate,
            iterations,
        }
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

pub fn active_indices(lambda: &[f64]) -> Vec<usize> {
    (0..lambda.len()).filter(|&i| lambda[i] > 0.0).collect()
}

/// Counters reported by the finite solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    /// Sector crossings, hinge additions/removals, or block merges/splits.
    pub steps: usize,
    /// Problem-order reductions of the critical-index method.
    pub deflations: usize,
    /// Full recomputations of a maintained factorisation.
    pub rebuilds: usize,
    /// Deterministic start-point perturbations applied.
    pub perturbations: usize,
}

/// Recorded samples plus the final result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub samples: Vec<TraceSample>,
    pub result: SolverResult,
    pub stats: SolverStats,
}

/// Outcome of a per-iteration check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Continue,
    Stop(Termination),
}

/// Shared bookkeeping for iterative loops: sampling, stopping and timing.
pub(crate) struct Monitor<'a> {
    ctl: &'a IterControl,
    cone: &'a ConeSystem,
    y: &'a [f64],
    clock: CpuClock,
    samples: Vec<TraceSample>,
    last_recorded: Option<usize>,
}

impl<'a> Monitor<'a> {
    pub fn new(ctl: &'a IterControl, cone: &'a ConeSystem, y: &'a [f64]) -> Result<Self> {
        ctl.validate(y.len())?;
        Ok(Self {
            ctl,
            cone,
            y,
            clock: CpuClock::start(),
            samples: Vec::new(),
            last_recorded: None,
        })
    }

    /// Iteration cap or CPU budget reached, without evaluating an iterate.
    pub fn exhausted(&self, iteration: usize) -> Option<Termination> {
        if iteration >= self.ctl.max_iterations {
            Some(Termination::IterationLimit)
        } else if self.ctl.cpu_budget.is_some_and(|b| self.clock.elapsed() >= b) {
            Some(Termination::TimeBudget)
        } else {
            None
        }
    }

    /// Record the final iterate of a finite method and classify it.
    pub fn conclude(&mut self, iteration: usize, x: &[f64], lambda: &[f64], monitor: Option<f64>) -> Termination {
        let kkt = self.cone.kkt_certificate(self.y, x, lambda);
        let distance = self.ctl.reference.as_ref().map(|r| l2_distance(x, r));
        self.record(iteration, x, kkt, distance, monitor);
        if kkt.passes(self.ctl.stop_tolerance) {
            Termination::Converged
        } else {
            Termination::Inexact
        }
    }

    /// Evaluate the iterate reached after `iteration` iterations.
    pub fn check(&mut self, iteration: usize, x: &[f64], lambda: &[f64], monitor: Option<f64>) -> Step {
        let kkt = self.cone.kkt_certificate(self.y, x, lambda);
        let distance = self.ctl.reference.as_ref().map(|r| l2_distance(x, r));
        let stop = if iteration > 0 || self.ctl.max_iterations > 0 {
            if self.ctl.stop_on_certificate && kkt.passes(self.ctl.stop_tolerance) {
                Some(Termination::Converged)
            } else if distance.is_some_and(|d| d <= self.ctl.stop_tolerance) {
                Some(Termination::ReferenceReached)
            } else {
                None
            }
        } else {
            None
        };
        let stop = stop.or_else(|| self.exhausted(iteration));
        if stop.is_some() || iteration.is_multiple_of(self.ctl.trace_stride) {
            self.record(iteration, x, kkt, distance, monitor);
        }
        stop.map_or(Step::Continue, Step::Stop)
    }

    fn record(
        &mut self,
        iteration: usize,
        x: &[f64],
        kkt: KktCertificate,
        distance: Option<f64>,
        monitor: Option<f64>,
    ) {
        if self.last_recorded == Some(iteration) {
            return;
        }
        let objective = weighted_sq_distance(x, self.y, self.cone.w());
        self.samples.push(TraceSample {
            iteration,
            cpu_seconds: self.clock.elapsed(),
            objective,
            kkt,
            distance,
            monitor,
        });
        self.last_recorded = Some(iteration);
    }

    pub fn finish(self, result: SolverResult, stats: SolverStats) -> SolverTrace {
        SolverTrace {
            samples: self.samples,
            result,
            stats,
        }
    }
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

pub fn weighted_sq_distance(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((p, q), wi)| wi * (p - q) * (p - q))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cpu_clock_is_monotone() {
        let c = CpuClock::start();
        let mut last = 0.0;
        let mut acc = 0.0f64;
        for i in 0..10_000 {
            acc += (i as f64).sqrt();
            let t = c.elapsed();
            assert!(t >= last);
            last = t;
        }
        assert!(acc > 0.0);
    }

    #[test]
    fn control_validation() {
        assert!(IterControl::default().validate(3).is_ok());
        assert!(IterControl::default().with_tolerance(0.0).validate(3).is_err());
        assert!(IterControl::default().with_stride(0).validate(3).is_err());
        assert!(IterControl::default().with_reference(vec![0.0; 2]).validate(3).is_err());
    }
}
