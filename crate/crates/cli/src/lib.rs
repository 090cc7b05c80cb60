//! Experiment runner for sequential weak measurements: config parsing,
//! post-selection sweeps, CSV/JSON output and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod output;
pub mod sweep;

pub use config::{parse_config, ConfigError, Mode, RunConfig};
pub use output::write_output;
pub use sweep::{run_sweep, summarize, ResultTable, Row};

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "SEQWEAK_THREADS";
