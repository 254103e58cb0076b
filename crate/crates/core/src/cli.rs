//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use conereg::bench::export::format_float;
use conereg::bench::{
    export, run_grid, run_validation, Family, GridConfig, RecordStatus, SignalSpec, ValidationConfig,
};
use conereg::finite::Init;
use conereg::trace::{IterControl, SolverResult, Termination};
use conereg::{build_cone_system, Error, Signal, SolverId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_GRID_FAILURE: i32 = 3;
pub const EXIT_VALIDATION_FAILURE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "conereg", version, about = "Concave regression solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one dataset.
    Solve(SolveArgs),
    /// Run a solver × signal × budget grid and write CSV records.
    Benchmark(BenchmarkArgs),
    /// Check every solver against exhaustive search on small random problems.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Empty,
    Full,
    Pav,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Solver id.
    #[arg(long, value_parser = parse_solver)]
    solver: SolverId,
    /// CSV file with header z,y and an optional w column.
    #[arg(long)]
    input: PathBuf,
    /// Starting active set for the active-set solvers that accept one.
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Iteration cap.
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    /// Stopping tolerance on the scaled KKT residuals.
    #[arg(long, default_value = "1e-10")]
    tol: f64,
    /// CPU time budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Output format; both carry the same fields.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Signal families.
    #[arg(long, value_delimiter = ',', default_values = ["s1", "s2", "s3"], value_parser = parse_family)]
    families: Vec<Family>,
    /// Signal lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [50usize, 200, 500])]
    sizes: Vec<usize>,
    /// Noise standard deviations.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1, 0.5])]
    sigmas: Vec<f64>,
    /// Signal seeds.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64])]
    seeds: Vec<u64>,
    /// Solver ids (all when omitted).
    #[arg(long, value_delimiter = ',', value_parser = parse_solver)]
    solvers: Vec<SolverId>,
    /// CPU budgets in seconds.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
    budgets: Vec<f64>,
    /// Record every n-th iterate.
    #[arg(long, default_value_t = 100)]
    stride: usize,
    /// Iteration cap per cell.
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    /// Stop a cell once its distance to the reference is below this
    /// (cells otherwise run to their budget or iteration cap).
    #[arg(long)]
    stop_distance: Option<f64>,
    /// Cells run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory receiving records.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Number of random problems.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Trial k uses signal seed `seed + k`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver ids (all when omitted).
    #[arg(long, value_delimiter = ',', value_parser = parse_solver)]
    solvers: Vec<SolverId>,
    #[arg(long, hide = true, value_parser = parse_solver)]
    inject_fault: Option<SolverId>,
}

fn parse_solver(s: &str) -> Result<SolverId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn command() -> clap::Command {
    let ids = format!("Solver ids: {}", SolverId::names());
    let mut cmd = Cli::command().after_help(ids.clone());
    for name in ["solve", "benchmark", "validate"] {
        cmd = cmd.mut_subcommand(name, |sub| sub.after_help(ids.clone()));
    }
    cmd
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => solve(&a, stdout, stderr),
        Command::Benchmark(a) => benchmark(&a, stdout, stderr),
        Command::Validate(a) => validate(&a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    solver: &'a str,
    termination: &'a str,
    iterations: usize,
    kkt_primal: f64,
    kkt_dual: f64,
    kkt_comp: f64,
    kkt_stationarity: f64,
    x: &'a [f64],
    lambda: &'a [f64],
    active_set: &'a [usize],
}

impl SolveOutput<'_> {
    /// Long-format CSV `field,index,value` holding the same fields as JSON.
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "field,index,value")?;
        writeln!(out, "solver,,{}", self.solver)?;
        writeln!(out, "termination,,{}", self.termination)?;
        writeln!(out, "iterations,,{}", self.iterations)?;
        writeln!(out, "kkt_primal,,{}", format_float(self.kkt_primal))?;
        writeln!(out, "kkt_dual,,{}", format_float(self.kkt_dual))?;
        writeln!(out, "kkt_comp,,{}", format_float(self.kkt_comp))?;
        writeln!(out, "kkt_stationarity,,{}", format_float(self.kkt_stationarity))?;
        for (i, &v) in self.x.iter().enumerate() {
            writeln!(out, "x,{i},{}", format_float(v))?;
        }
        for (i, &v) in self.lambda.iter().enumerate() {
            writeln!(out, "lambda,{i},{}", format_float(v))?;
        }
        for (k, j) in self.active_set.iter().enumerate() {
            writeln!(out, "active_set,{k},{j}")?;
        }
        Ok(())
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn solve(a: &SolveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> conereg::Result<i32> {
    let file = fs::File::open(&a.input).map_err(io_error(&a.input))?;
    let signal = Signal::read_csv(io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Error::InvalidArgument(format!("{}:{line}: {message}", a.input.display())),
        other => other,
    })?;
    let cone = build_cone_system(&signal);
    let mut ctl = IterControl::default()
        .with_max_iterations(a.max_iter)
        .with_tolerance(a.tol)
        .with_stride(a.max_iter.max(1));
    if let Some(b) = a.budget {
        ctl = ctl.with_budget(b);
    }
    let init = a.init.map(|i| match i {
        InitArg::Empty => Init::Empty,
        InitArg::Full => Init::Full,
        InitArg::Pav => Init::Pav,
    });
    let trace = match a.solver.run_with_init(&signal, &cone, &ctl, init.as_ref()) {
        Ok(t) => t,
        Err(e @ Error::InvalidArgument(_)) => return Err(e),
        Err(e) => {
            writeln!(stderr, "error: {e}").map_err(io_error(Path::new("<stderr>")))?;
            return Ok(EXIT_NONCONVERGENCE);
        }
    };
    let r: &SolverResult = &trace.result;
    let output = SolveOutput {
        solver: a.solver.as_str(),
        termination: r.termination.as_str(),
        iterations: r.iterations,
        kkt_primal: r.certificate.primal + 0.0,
        kkt_dual: r.certificate.dual + 0.0,
        kkt_comp: r.certificate.complementarity + 0.0,
        kkt_stationarity: r.certificate.stationarity + 0.0,
        x: &r.x,
        lambda: &r.lambda,
        active_set: &r.active_set,
    };
    let mut buf = Vec::new();
    match a.format {
        Format::Csv => output.write_csv(&mut buf).expect("writing to memory"),
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &output).expect("serialising plain data");
            buf.push(b'\n');
        }
    }
    match &a.out {
        Some(path) => fs::write(path, &buf).map_err(io_error(path))?,
        None => stdout.write_all(&buf).map_err(io_error(Path::new("<stdout>")))?,
    }
    Ok(match r.termination {
        Termination::Converged => EXIT_OK,
        _ if r.certificate.passes(a.tol) => EXIT_OK,
        _ => EXIT_NONCONVERGENCE,
    })
}

fn benchmark(a: &BenchmarkArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> conereg::Result<i32> {
    let mut specs = Vec::new();
    for &family in &a.families {
        for &n in &a.sizes {
            for &sigma in &a.sigmas {
                for &seed in &a.seeds {
                    specs.push(SignalSpec::new(family, n, sigma, seed)?);
                }
            }
        }
    }
    let config = GridConfig {
        specs,
        solvers: if a.solvers.is_empty() {
            SolverId::ALL.to_vec()
        } else {
            a.solvers.clone()
        },
        budgets: a.budgets.clone(),
        trace_stride: a.stride,
        max_iterations: a.max_iter,
        stop_distance: a.stop_distance,
        jobs: a.jobs,
    };
    config.validate()?;

    // Open both outputs before spending time on the grid.
    fs::create_dir_all(&a.out).map_err(io_error(&a.out))?;
    let records_path = a.out.join("records.csv");
    let summary_path = a.out.join("summary.csv");
    let records_file = fs::File::create(&records_path).map_err(io_error(&records_path))?;
    let summary_file = fs::File::create(&summary_path).map_err(io_error(&summary_path))?;

    let records = run_grid(&config)?;
    export::write_records(io::BufWriter::new(records_file), &records).map_err(|e| retarget(e, &records_path))?;
    export::write_summary(io::BufWriter::new(summary_file), &records).map_err(|e| retarget(e, &summary_path))?;

    let failed = records.iter().filter(|r| r.status == RecordStatus::Failed).count();
    let _ = writeln!(
        stdout,
        "{} cells, {} failed; wrote {} and {}",
        records.len(),
        failed,
        records_path.display(),
        summary_path.display()
    );
    if failed > 0 {
        for r in records.iter().filter(|r| r.status == RecordStatus::Failed) {
            let s = &r.spec;
            let _ = writeln!(
                stderr,
                "failed: {} {} n={} sigma={} seed={} budget={}",
                r.solver, s.family, s.n, s.sigma, s.seed, r.budget_s
            );
        }
        return Ok(EXIT_GRID_FAILURE);
    }
    Ok(EXIT_OK)
}

fn retarget(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

fn validate(a: &ValidateArgs, stdout: &mut dyn Write) -> conereg::Result<i32> {
    let config = ValidationConfig {
        trials: a.trials,
        seed: a.seed,
        solvers: if a.solvers.is_empty() {
            SolverId::ALL.to_vec()
        } else {
            a.solvers.clone()
        },
        fault: a.inject_fault,
    };
    let report = run_validation(&config)?;
    let mut text = String::new();
    text.push_str(&format!("trials: {}, seeds {}..{}\n", report.trials, a.seed, a.seed.wrapping_add(a.trials as u64)));
    text.push_str("solver,max_deviation,worst_seed,errors,status\n");
    for row in &report.solvers {
        let worst = row.worst_seed.map_or(String::new(), |s| s.to_string());
        let status = match row.first_failure {
            None => "pass".to_string(),
            Some(seed) => format!("FAIL at seed {seed}"),
        };
        text.push_str(&format!("{},{:.3e},{worst},{},{status}\n", row.solver, row.max_deviation, row.errors));
    }
    stdout.write_all(text.as_bytes()).map_err(io_error(Path::new("<stdout>")))?;
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_VALIDATION_FAILURE
    })
}
