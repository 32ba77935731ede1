//! Monte Carlo BER sweeps, run configuration and report files.

mod config;
mod output;
mod sweep;

pub use config::{Placement, RunConfig, Scheme};
pub use output::{emit_csv, emit_json_summary, parse_csv, summarize, wilson_interval, CellSummary, CsvRow, Summary};
pub use sweep::{run_sweep, run_sweep_with_threads, BerRecord};
