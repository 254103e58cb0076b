use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn conereg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conereg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_input(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn field(csv: &str, name: &str) -> Vec<String> {
    csv.lines()
        .filter_map(|l| {
            let mut parts = l.splitn(3, ',');
            (parts.next() == Some(name)).then(|| parts.nth(1).unwrap().to_string())
        })
        .collect()
}

const SOLVER_IDS: [&str; 12] = [
    "hildreth",
    "dykstra",
    "lsps",
    "uzawa",
    "admm",
    "mpdb",
    "mpdb-pav",
    "meyer-empty",
    "meyer-full",
    "meyer-pav",
    "critical-index",
    "block",
];

#[test]
fn help_matches_snapshots() {
    let snapshots = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/snapshots");
    let cases: [(&[&str], &str); 4] = [
        (&["--help"], "help.txt"),
        (&["solve", "--help"], "help_solve.txt"),
        (&["benchmark", "--help"], "help_benchmark.txt"),
        (&["validate", "--help"], "help_validate.txt"),
    ];
    for (args, file) in cases {
        let out = conereg(args);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout(&out);
        let path = snapshots.join(file);
        if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
            fs::write(&path, &text).unwrap();
        }
        assert_eq!(text, fs::read_to_string(&path).unwrap(), "{file} changed; rerun with UPDATE_SNAPSHOTS=1");
        for id in SOLVER_IDS {
            assert!(text.contains(id), "{file} lacks solver {id}");
        }
    }
    let solve_help = fs::read_to_string(snapshots.join("help_solve.txt")).unwrap();
    for flag in ["--solver", "--input", "--init", "--max-iter", "--tol", "--budget", "--format", "--out"] {
        assert!(solve_help.contains(flag), "{flag}");
    }
    let bench_help = fs::read_to_string(snapshots.join("help_benchmark.txt")).unwrap();
    for flag in [
        "--families", "--sizes", "--sigmas", "--seeds", "--solvers", "--budgets", "--stride", "--max-iter",
        "--stop-distance", "--jobs", "--out",
    ] {
        assert!(bench_help.contains(flag), "{flag}");
    }
}

#[test]
fn solve_three_point_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "tri.csv", "z,y\n1,0\n2,-1\n3,0\n");
    let out = conereg(&["solve", "--solver", "mpdb", "--input", &input]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("field,index,value\n"));
    let x: Vec<f64> = field(&text, "x").iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(x.len(), 3);
    for v in x {
        assert!((v + 1.0 / 3.0).abs() < 1e-12);
    }
    assert_eq!(field(&text, "termination"), ["converged"]);
    assert_eq!(field(&text, "active_set"), ["0"]);
}

#[test]
fn solve_json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "d.csv", "z,y,w\n0,1,1\n1,3,2\n2,2,1\n4,0,1\n5,4,3\n");
    let csv_out = conereg(&["solve", "--solver", "meyer-pav", "--input", &input]);
    let json_out = conereg(&["solve", "--solver", "meyer-pav", "--input", &input, "--format", "json"]);
    assert_eq!(csv_out.status.code(), Some(0));
    assert_eq!(json_out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&json_out.stdout).unwrap();
    let csv = stdout(&csv_out);
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    for key in &keys {
        assert!(!field(&csv, key).is_empty() || json[*key].as_array().is_some_and(|a| a.is_empty()), "{key}");
    }
    let x_csv: Vec<f64> = field(&csv, "x").iter().map(|v| v.parse().unwrap()).collect();
    let x_json: Vec<f64> = serde_json::from_value(json["x"].clone()).unwrap();
    assert_eq!(x_csv, x_json);
}

#[test]
fn solve_with_zero_iterations_reports_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "tri.csv", "z,y\n1,0\n2,-1\n3,0\n");
    let out = conereg(&["solve", "--solver", "admm", "--input", &input, "--max-iter", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(field(&stdout(&out), "termination"), ["iteration_limit"]);
    assert_eq!(field(&stdout(&out), "x").len(), 3);
}

#[test]
fn solve_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "tri.csv", "z,y\n1,0\n2,-1\n3,0\n");
    let target = dir.path().join("fit.json");
    let out = conereg(&[
        "solve", "--solver", "block", "--input", &input, "--format", "json", "--out", target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(fs::read_to_string(target).unwrap().contains("\"termination\": \"converged\""));
}

#[test]
fn unknown_solver_lists_valid_names() {
    let out = conereg(&["solve", "--solver", "simplex", "--input", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for id in SOLVER_IDS {
        assert!(err.contains(id), "{err}");
    }
}

#[test]
fn malformed_input_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "bad.csv", "z,y\n1,0\n2,oops\n3,0\n");
    let out = conereg(&["solve", "--solver", "mpdb", "--input", &input]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.csv:3"), "{}", stderr(&out));

    let missing = conereg(&["solve", "--solver", "mpdb", "--input", "/nonexistent/input.csv"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn init_override_rejected_for_dual_methods() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "tri.csv", "z,y\n1,0\n2,-1\n3,0\n");
    let out = conereg(&["solve", "--solver", "hildreth", "--input", &input, "--init", "pav"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn benchmark_default_grid_cardinality() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("grid");
    let out = conereg(&[
        "benchmark", "--sizes", "50", "--budgets", "0.01", "--stop-distance", "1e-9", "--jobs", "2", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    // 12 solvers × 3 families × 3 noise levels.
    assert_eq!(rows.len(), 108);
    for id in SOLVER_IDS {
        for family in ["s1", "s2", "s3"] {
            for sigma in ["0.01", "0.1", "0.5"] {
                let prefix = format!("{id},{family},50,{sigma},1,0.01,");
                assert!(rows.iter().any(|r| r.starts_with(&prefix)), "{prefix}");
            }
        }
    }
    let records = fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert!(records.starts_with(
        "solver,family,n,sigma,seed,budget_s,cpu_s,l2_distance,kkt_primal,kkt_dual,kkt_comp,status\n"
    ));
}

#[test]
fn benchmark_admm_not_worse_than_hildreth_on_noise() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("noise");
    let out = conereg(&[
        "benchmark", "--solvers", "admm,hildreth", "--families", "s2", "--sizes", "50", "--sigmas", "0.5",
        "--budgets", "1", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let distance = |solver: &str| -> f64 {
        let row = summary.lines().find(|l| l.starts_with(&format!("{solver},"))).unwrap();
        row.split(',').nth(7).unwrap().parse().unwrap()
    };
    assert!(distance("admm") <= distance("hildreth"), "{summary}");
}

#[test]
fn benchmark_unwritable_out_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let out = conereg(&["benchmark", "--sizes", "50", "--solvers", "mpdb", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sub"));
}

#[test]
fn validate_is_deterministic() {
    let a = conereg(&["validate", "--trials", "100", "--seed", "7"]);
    let b = conereg(&["validate", "--trials", "100", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    for id in SOLVER_IDS {
        assert!(stdout(&a).lines().any(|l| l.starts_with(&format!("{id},")) && l.ends_with(",pass")));
    }
}

#[test]
fn validate_reports_injected_fault() {
    let out = conereg(&["validate", "--trials", "4", "--seed", "21", "--inject-fault", "critical-index"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stdout(&out).contains("critical-index,1.000e-3,21,0,FAIL at seed 21"), "{}", stdout(&out));
}
