//! CSV export and import of grid records.
//!
//! Record files hold one row per trace sample. Failed cells have a single
//! row with the numeric sample fields left empty. Floats are written in
//! shortest round-trip form, so a written file reads back bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::SolverId;

use super::grid::{ExperimentRecord, RecordSample, RecordStatus};
use super::signals::SignalSpec;

pub const RECORD_HEADER: [&str; 12] = [
    "solver", "family", "n", "sigma", "seed", "budget_s", "cpu_s", "l2_distance", "kkt_primal", "kkt_dual",
    "kkt_comp", "status",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "solver", "family", "n", "sigma", "seed", "budget_s", "cpu_s", "l2_distance", "samples", "status",
];

/// Shortest representation that parses back to the same `f64`, switching to
/// exponent notation for very small or large magnitudes.
pub fn format_float(v: f64) -> String {
    let v = v + 0.0;
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: "<csv>".into(),
            source,
        },
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn cell_fields(r: &ExperimentRecord) -> [String; 6] {
    [
        r.solver.to_string(),
        r.spec.family.to_string(),
        r.spec.n.to_string(),
        format_float(r.spec.sigma),
        r.spec.seed.to_string(),
        format_float(r.budget_s),
    ]
}

/// Write records in the long (one row per sample) format.
pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(csv_error)?;
    for r in records {
        let cell = cell_fields(r);
        let status = r.status.as_str();
        if r.samples.is_empty() {
            let row = cell.iter().map(String::as_str).chain(["", "", "", "", "", status]);
            w.write_record(row).map_err(csv_error)?;
        }
        for s in &r.samples {
            let nums = [s.cpu_s, s.l2_distance, s.kkt_primal, s.kkt_dual, s.kkt_comp].map(format_float);
            let row = cell
                .iter()
                .map(String::as_str)
                .chain(nums.iter().map(String::as_str))
                .chain([status]);
            w.write_record(row).map_err(csv_error)?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })
}

pub fn write_records_to_path(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_records(std::io::BufWriter::new(file), records)
}

fn parse<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} '{field}'"),
    })
}

/// Read a file produced by [`write_records`]. Consecutive rows sharing a
/// cell (solver, signal, budget and status) form one record.
pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_error)?.clone();
    if header.iter().ne(RECORD_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header, expected {}", RECORD_HEADER.join(",")),
        });
    }
    let mut records: Vec<ExperimentRecord> = Vec::new();
    let mut last_key: Option<Vec<String>> = None;
    for (k, row) in rd.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let line = k + 2;
        let key: Vec<String> = [0, 1, 2, 3, 4, 5, 11].iter().map(|&i| row[i].to_string()).collect();
        let status: RecordStatus = parse(&row[11], "status", line)?;
        let sample = if row[6].is_empty() {
            None
        } else {
            Some(RecordSample {
                cpu_s: parse(&row[6], "cpu_s", line)?,
                l2_distance: parse(&row[7], "l2_distance", line)?,
                kkt_primal: parse(&row[8], "kkt_primal", line)?,
                kkt_dual: parse(&row[9], "kkt_dual", line)?,
                kkt_comp: parse(&row[10], "kkt_comp", line)?,
            })
        };
        if last_key.as_ref() != Some(&key) {
            let spec = SignalSpec {
                family: parse(&row[1], "family", line)?,
                n: parse(&row[2], "n", line)?,
                sigma: parse(&row[3], "sigma", line)?,
                seed: parse(&row[4], "seed", line)?,
            };
            records.push(ExperimentRecord {
                solver: parse::<SolverId>(&row[0], "solver", line)?,
                spec,
                budget_s: parse(&row[5], "budget_s", line)?,
                samples: Vec::new(),
                status,
            });
            last_key = Some(key);
        }
        if let Some(s) = sample {
            records.last_mut().expect("record pushed above").samples.push(s);
        }
    }
    Ok(records)
}

/// One summary row per record: the terminal sample and sample count.
pub fn summary_rows(records: &[ExperimentRecord]) -> Vec<[String; 10]> {
    records
        .iter()
        .map(|r| {
            let [solver, family, n, sigma, seed, budget] = cell_fields(r);
            let (cpu, dist) = r
                .samples
                .last()
                .map_or((String::new(), String::new()), |s| (format_float(s.cpu_s), format_float(s.l2_distance)));
            [
                solver,
                family,
                n,
                sigma,
                seed,
                budget,
                cpu,
                dist,
                r.samples.len().to_string(),
                r.status.to_string(),
            ]
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for row in summary_rows(records) {
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })
}
