//! Solver × signal × budget grids.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::cone::build_cone_system;
use crate::error::{Error, Result};
use crate::solver::SolverId;
use crate::trace::{l2_distance, IterControl, SolverResult, Termination};

use super::reference::reference_solution;
use super::signals::{generate_signal, SignalSpec};

/// Distance to the reference below which a run counts as completed.
pub const COMPLETION_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordStatus {
    /// Ended within the completion distance of the reference.
    Completed,
    /// Ran out of CPU time or iterations away from the reference.
    Budget,
    /// Errored, or finished away from the reference.
    Failed,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::Budget => "budget",
            Self::Failed => "failed",
        }
    }
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "completed" => Ok(Self::Completed),
            "budget" => Ok(Self::Budget),
            "failed" => Ok(Self::Failed),
            other => Err(Error::InvalidArgument(format!("unknown record status '{other}'"))),
        }
    }
}

/// One point of a distance-to-reference curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordSample {
    pub cpu_s: f64,
    pub l2_distance: f64,
    pub kkt_primal: f64,
    pub kkt_dual: f64,
    pub kkt_comp: f64,
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub solver: SolverId,
    pub spec: SignalSpec,
    pub budget_s: f64,
    /// CPU time non-decreasing; empty only for failed cells.
    pub samples: Vec<RecordSample>,
    pub status: RecordStatus,
}

impl ExperimentRecord {
    pub fn terminal_distance(&self) -> Option<f64> {
        self.samples.last().map(|s| s.l2_distance)
    }
}

/// Cells to run and how to run them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub specs: Vec<SignalSpec>,
    pub solvers: Vec<SolverId>,
    /// CPU budgets in seconds.
    pub budgets: Vec<f64>,
    pub trace_stride: usize,
    pub max_iterations: usize,
    /// Stop a cell once its distance to the reference falls below this.
    /// `None` runs every iterative solver to its budget or iteration cap.
    pub stop_distance: Option<f64>,
    /// Cells run concurrently; keep at or below the number of physical cores
    /// so thread CPU times stay meaningful.
    pub jobs: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let ctl = IterControl::default();
        Self {
            specs: Vec::new(),
            solvers: SolverId::ALL.to_vec(),
            budgets: vec![1.0],
            trace_stride: 100,
            max_iterations: ctl.max_iterations,
            stop_distance: None,
            jobs: 1,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::InvalidArgument("at least one job is required".into()));
        }
        if let Some(b) = self.budgets.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidArgument(format!("budget {b} must be positive")));
        }
        for spec in &self.specs {
            spec.validate()?;
        }
        IterControl::default()
            .with_stride(self.trace_stride)
            .with_tolerance(self.stop_distance.unwrap_or(f64::MIN_POSITIVE))
            .with_max_iterations(self.max_iterations)
            .validate(3)
    }

    /// Number of cells, `|specs| · |solvers| · |budgets|`.
    pub fn cell_count(&self) -> usize {
        self.specs.len() * self.solvers.len() * self.budgets.len()
    }
}

/// Run every cell. A failing cell (or a spec whose reference cannot be
/// established) yields `failed` records and the grid carries on. Records
/// come back ordered by spec, then solver, then budget, whatever `jobs` is.
pub fn run_grid(config: &GridConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let references: Vec<Option<Vec<f64>>> = parallel_map(config.specs.len(), config.jobs, |k| {
        let signal = generate_signal(&config.specs[k]).ok()?;
        let cone = build_cone_system(&signal);
        reference_solution(&signal, &cone).ok().map(|r| r.x)
    });

    let per_spec = config.solvers.len() * config.budgets.len();
    Ok(parallel_map(config.cell_count(), config.jobs, |cell| {
        let k = cell / per_spec;
        let rest = cell % per_spec;
        let solver = config.solvers[rest / config.budgets.len()];
        let budget = config.budgets[rest % config.budgets.len()];
        let spec = config.specs[k];
        let failed = || ExperimentRecord {
            solver,
            spec,
            budget_s: budget,
            samples: Vec::new(),
            status: RecordStatus::Failed,
        };
        let Some(reference) = &references[k] else {
            return failed();
        };
        run_cell(config, spec, solver, budget, reference).unwrap_or_else(|_| failed())
    }))
}

fn run_cell(
    config: &GridConfig,
    spec: SignalSpec,
    solver: SolverId,
    budget: f64,
    reference: &[f64],
) -> Result<ExperimentRecord> {
    let signal = generate_signal(&spec)?;
    let cone = build_cone_system(&signal);
    let ctl = IterControl::default()
        .with_budget(budget)
        .with_max_iterations(config.max_iterations)
        .with_tolerance(config.stop_distance.unwrap_or(f64::MIN_POSITIVE))
        .with_certificate_stop(false)
        .with_stride(config.trace_stride)
        .with_reference(reference.to_vec());
    let trace = solver.run(&signal, &cone, &ctl)?;
    let mut samples: Vec<RecordSample> = trace
        .samples
        .iter()
        .map(|s| RecordSample {
            cpu_s: s.cpu_seconds,
            l2_distance: s.distance.unwrap_or(f64::NAN),
            kkt_primal: s.kkt.primal,
            kkt_dual: s.kkt.dual,
            kkt_comp: s.kkt.complementarity,
        })
        .collect();
    if samples.is_empty() {
        samples.push(terminal_sample(&trace.result, reference, 0.0));
    }
    let status = classify(&trace.result, reference);
    Ok(ExperimentRecord {
        solver,
        spec,
        budget_s: budget,
        samples,
        status,
    })
}

fn terminal_sample(result: &SolverResult, reference: &[f64], cpu_s: f64) -> RecordSample {
    RecordSample {
        cpu_s,
        l2_distance: l2_distance(&result.x, reference),
        kkt_primal: result.certificate.primal,
        kkt_dual: result.certificate.dual,
        kkt_comp: result.certificate.complementarity,
    }
}

fn classify(result: &SolverResult, reference: &[f64]) -> RecordStatus {
    if l2_distance(&result.x, reference) <= COMPLETION_DISTANCE {
        RecordStatus::Completed
    } else if matches!(result.termination, Termination::IterationLimit | Termination::TimeBudget) {
        RecordStatus::Budget
    } else {
        RecordStatus::Failed
    }
}

/// `f(0..count)` on up to `jobs` scoped threads, results in index order.
fn parallel_map<T: Send, F: Fn(usize) -> T + Sync>(count: usize, jobs: usize, f: F) -> Vec<T> {
    if jobs <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<(usize, T)>> = Mutex::new(Vec::with_capacity(count));
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(count) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = f(i);
                out.lock().expect("result lock poisoned").push((i, value));
            });
        }
    });
    let mut out = out.into_inner().expect("result lock poisoned");
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, v)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::Family;

    fn small_grid() -> GridConfig {
        GridConfig {
            specs: vec![SignalSpec::new(Family::S1, 30, 0.1, 1).unwrap()],
            solvers: vec![SolverId::Admm, SolverId::MeyerEmpty],
            budgets: vec![1.0],
            trace_stride: 10,
            stop_distance: Some(1e-9),
            ..GridConfig::default()
        }
    }

    #[test]
    fn one_record_per_cell() {
        let records = run_grid(&small_grid()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].solver, SolverId::Admm);
        for r in &records {
            assert_eq!(r.status, RecordStatus::Completed);
            assert!(r.samples.windows(2).all(|p| p[0].cpu_s <= p[1].cpu_s));
            assert!(r.terminal_distance().unwrap() <= COMPLETION_DISTANCE);
        }
    }

    #[test]
    fn parallel_matches_serial_order() {
        let mut cfg = small_grid();
        cfg.solvers = vec![SolverId::MeyerEmpty, SolverId::Block, SolverId::Mpdb];
        let serial = run_grid(&cfg).unwrap();
        cfg.jobs = 3;
        let parallel = run_grid(&cfg).unwrap();
        let key = |r: &ExperimentRecord| (r.solver, r.status, r.samples.len());
        assert_eq!(serial.iter().map(key).collect::<Vec<_>>(), parallel.iter().map(key).collect::<Vec<_>>());
    }

    #[test]
    fn iteration_cap_is_a_budget_status() {
        let mut cfg = small_grid();
        cfg.solvers = vec![SolverId::Hildreth];
        cfg.max_iterations = 3;
        let records = run_grid(&cfg).unwrap();
        assert_eq!(records[0].status, RecordStatus::Budget);
    }
}
