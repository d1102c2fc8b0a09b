//! Configuration, single runs, sweeps and fit reports behind the `kzqfi`
//! command-line tool.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{ConfigLoader, Engine, RunConfig, SweepConfig, SystemSize};
pub use error::{exit, CliError, Result};
pub use report::{fit_command, FitMode, FitOptions};
pub use run::{ground_state_report, read_records, run_single, Manifest, RecordRow, RunOutcome};
pub use sweep::{enumerate_cells, run_sweep, SweepSummary};
