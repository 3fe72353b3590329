//! End-to-end runs: configuration, the periodic-box spectral solver,
//! persistence of results and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod persist;
pub mod spectral;

pub use cli::run_cli;
pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use experiments::{run, Attachments, RunOptions};
pub use persist::{persist, ResultRecord, Trace, Verdict};
pub use spectral::{simulate_box, BoxTrace};
