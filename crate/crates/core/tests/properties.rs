use conereg::bench::export::{read_records, write_records};
use conereg::bench::{generate_signal, ExperimentRecord, Family, RecordSample, RecordStatus, SignalSpec};
use conereg::trace::{linf_distance, IterControl};
use conereg::warmstart::{brute_force_project, pav_warm_start};
use conereg::{build_cone_system, Signal, SolverId};
use proptest::prelude::*;

fn signal_strategy(max_n: usize) -> impl Strategy<Value = Signal> {
    (3..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.05f64..3.0, n),
                prop::collection::vec(-50.0f64..50.0, n),
                prop::collection::vec(0.2f64..5.0, n),
                any::<bool>(),
            )
        })
        .prop_map(|(gaps, y, w, unit)| {
            let mut t = 0.0;
            let z = gaps
                .iter()
                .map(|g| {
                    t += g;
                    t
                })
                .collect();
            let w = if unit { vec![1.0; y.len()] } else { w };
            Signal::new(z, y, w).unwrap()
        })
}

fn project(solver: SolverId, s: &Signal) -> Vec<f64> {
    let c = build_cone_system(s);
    solver.run(s, &c, &IterControl::default()).unwrap().result.x
}

fn scale(s: &Signal) -> f64 {
    s.y().iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_feasible_and_idempotent(s in signal_strategy(40)) {
        let c = build_cone_system(&s);
        let x = project(SolverId::Mpdb, &s);
        let tol = 1e-9 * scale(&s);
        prop_assert!(c.apply_a(&x).iter().all(|&v| v <= tol));
        let again = project(SolverId::Block, &s.with_y(x.clone()).unwrap());
        prop_assert!(linf_distance(&again, &x) <= tol);
    }

    #[test]
    fn projection_is_positively_homogeneous(s in signal_strategy(30), k in 0.01f64..100.0) {
        let x = project(SolverId::MeyerPav, &s);
        let ys: Vec<f64> = s.y().iter().map(|v| k * v).collect();
        let xs = project(SolverId::MeyerPav, &s.with_y(ys).unwrap());
        let expected: Vec<f64> = x.iter().map(|v| k * v).collect();
        prop_assert!(linf_distance(&xs, &expected) <= 1e-8 * k * scale(&s));
    }

    #[test]
    fn affine_shifts_pass_through(s in signal_strategy(30), a in -10.0f64..10.0, b in -3.0f64..3.0) {
        let x = project(SolverId::CriticalIndex, &s);
        let shifted: Vec<f64> = s.y().iter().zip(s.z()).map(|(y, z)| y + a + b * z).collect();
        let xs = project(SolverId::CriticalIndex, &s.with_y(shifted).unwrap());
        let expected: Vec<f64> = x.iter().zip(s.z()).map(|(x, z)| x + a + b * z).collect();
        let zmax = s.z().last().unwrap().abs();
        prop_assert!(linf_distance(&xs, &expected) <= 1e-8 * (scale(&s) + a.abs() + b.abs() * zmax));
    }

    #[test]
    fn projection_is_nonexpansive(s in signal_strategy(25), noise in prop::collection::vec(-5.0f64..5.0, 25)) {
        let other: Vec<f64> = s.y().iter().zip(&noise).map(|(y, e)| y + e).collect();
        let t = s.with_y(other).unwrap();
        let (xa, xb) = (project(SolverId::Mpdb, &s), project(SolverId::Mpdb, &t));
        let lhs = s.weighted_sq_dist(&xa, &xb).sqrt();
        let rhs = s.weighted_sq_dist(s.y(), t.y()).sqrt();
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-9);
    }

    #[test]
    fn residual_is_orthogonal_to_the_fit(s in signal_strategy(30)) {
        let c = build_cone_system(&s);
        let r = SolverId::MpdbPav.run(&s, &c, &IterControl::default()).unwrap().result;
        let inner: f64 = (0..s.len()).map(|i| s.w()[i] * r.x[i] * (s.y()[i] - r.x[i])).sum();
        prop_assert!(inner.abs() <= 1e-8 * scale(&s).powi(2) * s.len() as f64);
        prop_assert!(r.lambda.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn finite_solvers_match_enumeration(s in signal_strategy(10)) {
        let c = build_cone_system(&s);
        let exact = brute_force_project(&s, &c).unwrap();
        for id in SolverId::ALL.into_iter().filter(|id| id.is_finite()) {
            let x = project(id, &s);
            prop_assert!(linf_distance(&x, &exact.x) <= 1e-8 * scale(&s), "{}", id);
        }
    }

    #[test]
    fn warm_start_is_feasible(s in signal_strategy(200)) {
        let c = build_cone_system(&s);
        let ws = pav_warm_start(&s, &c).unwrap();
        prop_assert!(c.apply_a(&ws.x).iter().all(|&v| v <= 1e-9 * scale(&s)));
        prop_assert!(ws.saturated.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn signals_are_reproducible(n in 3usize..300, sigma in 0.0f64..2.0, seed in any::<u64>(), f in 0usize..3) {
        let spec = SignalSpec::new(Family::ALL[f], n, sigma, seed).unwrap();
        let a = generate_signal(&spec).unwrap();
        let b = generate_signal(&spec).unwrap();
        prop_assert_eq!(a.y().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.y().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn records_round_trip(
        samples in prop::collection::vec(prop::array::uniform5(prop::num::f64::NORMAL | prop::num::f64::ZERO), 0..6),
        budget in 1e-3f64..100.0,
        sigma in 0.0f64..1.0,
    ) {
        let spec = SignalSpec::new(Family::S3, 17, sigma, 4).unwrap();
        let status = if samples.is_empty() { RecordStatus::Failed } else { RecordStatus::Budget };
        let record = ExperimentRecord {
            solver: SolverId::Uzawa,
            spec,
            budget_s: budget,
            samples: samples
                .iter()
                .map(|v| RecordSample {
                    cpu_s: v[0].abs(),
                    l2_distance: v[1].abs(),
                    kkt_primal: v[2],
                    kkt_dual: v[3],
                    kkt_comp: v[4],
                })
                .collect(),
            status,
        };
        let mut buf = Vec::new();
        write_records(&mut buf, std::slice::from_ref(&record)).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].samples.len(), record.samples.len());
        for (p, q) in back[0].samples.iter().zip(&record.samples) {
            for (u, v) in [(p.cpu_s, q.cpu_s), (p.l2_distance, q.l2_distance), (p.kkt_primal, q.kkt_primal),
                           (p.kkt_dual, q.kkt_dual), (p.kkt_comp, q.kkt_comp)] {
                prop_assert_eq!(u, v + 0.0);
            }
        }
        prop_assert_eq!(back[0].budget_s, budget);
        prop_assert_eq!(back[0].spec, spec);
    }
}
