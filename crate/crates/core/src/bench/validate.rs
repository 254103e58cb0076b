//! Agreement of every solver with exhaustive enumeration on small problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::build_cone_system;
use crate::error::Result;
use crate::signal::Signal;
use crate::solver::SolverId;
use crate::trace::{linf_distance, IterControl};
use crate::warmstart::brute_force_project;

/// Largest L∞ deviation from the exhaustive solution that still passes.
pub const VALIDATION_TOLERANCE: f64 = 1e-6;

/// Shift added to the answer of a fault-injected solver.
pub const INJECTED_FAULT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub trials: usize,
    /// Trial `k` draws its signal from seed `seed + k`.
    pub seed: u64,
    pub solvers: Vec<SolverId>,
    /// Corrupt this solver's answers, to exercise the failure path.
    pub fault: Option<SolverId>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            solvers: SolverId::ALL.to_vec(),
            fault: None,
        }
    }
}

/// Worst case seen for one solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverValidation {
    pub solver: SolverId,
    pub max_deviation: f64,
    /// Seed of the trial attaining `max_deviation`.
    pub worst_seed: Option<u64>,
    /// First trial seed that errored or exceeded the tolerance.
    pub first_failure: Option<u64>,
    pub errors: usize,
}

impl SolverValidation {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub trials: usize,
    pub solvers: Vec<SolverValidation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.solvers.iter().all(SolverValidation::passed)
    }
}

/// Random problem with `4 ≤ n ≤ 12`: uniform or irregular abscissae,
/// optional weights, values mixing noise with a concave trend.
pub fn random_small_signal(seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=12);
    let uniform = rng.random_bool(0.5);
    let mut z = Vec::with_capacity(n);
    let mut t = 0.0f64;
    for _ in 0..n {
        t += if uniform { 1.0 } else { rng.random_range(0.05..3.0) };
        z.push(t);
    }
    let scale = 10f64.powi(rng.random_range(-2..=1));
    let curve = rng.random_range(0.0..2.0);
    let y = z
        .iter()
        .map(|&v| scale * (rng.random_range(-1.0..1.0) - curve * (v - t / 2.0).powi(2) / t))
        .collect();
    let w = if rng.random_bool(0.3) {
        (0..n).map(|_| rng.random_range(0.2..5.0)).collect()
    } else {
        vec![1.0; n]
    };
    Signal::new(z, y, w).expect("generated abscissae are increasing")
}

/// Iteration control for the validation runs: tight tolerance, generous cap.
pub fn validation_control() -> IterControl {
    IterControl::default().with_tolerance(1e-11).with_max_iterations(1_000_000)
}

pub fn run_validation(config: &ValidationConfig) -> Result<ValidationReport> {
    let mut rows: Vec<SolverValidation> = config
        .solvers
        .iter()
        .map(|&solver| SolverValidation {
            solver,
            max_deviation: 0.0,
            worst_seed: None,
            first_failure: None,
            errors: 0,
        })
        .collect();
    let ctl = validation_control();
    for k in 0..config.trials {
        let seed = config.seed.wrapping_add(k as u64);
        let signal = random_small_signal(seed);
        let cone = build_cone_system(&signal);
        let exact = brute_force_project(&signal, &cone)?;
        for row in &mut rows {
            let deviation = match row.solver.run(&signal, &cone, &ctl) {
                Ok(trace) => {
                    let mut x = trace.result.x;
                    if config.fault == Some(row.solver) {
                        x[0] += INJECTED_FAULT;
                    }
                    Some(linf_distance(&x, &exact.x))
                }
                Err(_) => None,
            };
            match deviation {
                Some(d) => {
                    if d > row.max_deviation || row.worst_seed.is_none() {
                        row.max_deviation = row.max_deviation.max(d);
                        row.worst_seed = Some(seed);
                    }
                    if !(d <= VALIDATION_TOLERANCE) && row.first_failure.is_none() {
                        row.first_failure = Some(seed);
                    }
                }
                None => {
                    row.errors += 1;
                    row.first_failure.get_or_insert(seed);
                }
            }
        }
    }
    Ok(ValidationReport {
        trials: config.trials,
        solvers: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_solvers_pass_a_short_run() {
        let report = run_validation(&ValidationConfig {
            trials: 20,
            seed: 3,
            ..ValidationConfig::default()
        })
        .unwrap();
        for row in &report.solvers {
            assert!(row.passed(), "{row:?}");
        }
    }

    #[test]
    fn injected_fault_fails_on_first_trial() {
        let report = run_validation(&ValidationConfig {
            trials: 3,
            seed: 11,
            solvers: vec![SolverId::Mpdb, SolverId::Admm],
            fault: Some(SolverId::Admm),
        })
        .unwrap();
        assert!(report.solvers[0].passed());
        assert_eq!(report.solvers[1].first_failure, Some(11));
        assert!(!report.passed());
    }
}
