//! Configuration parsing and experiment driver behind the `biharm-dual`
//! executable.

pub mod config;
pub mod run;

pub use config::{parse_config, read_config, Builder, ConfigErrors, Diagnostic, Mode, RunConfig};
pub use run::{read_field_csv, run, RunError, RunOutcome, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK};
