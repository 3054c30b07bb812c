pub mod commands;
pub mod config;
pub mod output;

pub use commands::{ensemble_config, rates_report, run_command, weighting, window_start, Command, Overrides};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use output::{verify_manifest, OutputDir, CSV_FORMAT_VERSION, MANIFEST_NAME};
