//! The rate-table sweep through the experiment runner, as the CLI does it.

use fuchswave::solver::{run, ExperimentConfig, ExperimentKind, RunOptions};
use std::path::Path;

fn main() -> fuchswave::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/rate_table.json");
    let config = ExperimentConfig::load(&path)?;
    let (record, _) = run(&config, ExperimentKind::TableSweep, &RunOptions::default())?;
    for v in &record.verdicts {
        println!("{}", v.line());
    }
    println!("config hash {}, {:.2}s", record.hash8(), record.wall_time);
    Ok(())
}
