//! Command-line driver: training, evaluation, table metrics and
//! explanations, all writing into one run directory.

pub mod commands;
pub mod config;

pub use commands::{cmd_evaluate, cmd_explain, cmd_metrics, cmd_train, Manifest};
pub use config::{Precision, RunConfig};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const RESULTS_HEADER: &str = "name,accuracy,error,classes,pce";
