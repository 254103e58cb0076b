//! Benchmark harness: test signals, reference solutions, grids and export.

pub mod export;
pub mod grid;
pub mod reference;
pub mod signals;
pub mod validate;

pub use export::{read_records, summary_rows, write_records, write_summary, RECORD_HEADER};
pub use grid::{run_grid, ExperimentRecord, GridConfig, RecordSample, RecordStatus};
pub use reference::{reconcile, reference_solution};
pub use signals::{generate_signal, Family, SignalSpec};
pub use validate::{random_small_signal, run_validation, ValidationConfig, ValidationReport};
