//! Runs the camouflage benchmark: default synthetic graph, 80% training,
//! five seeds, every method.

use std::time::Instant;

use graphconsis::data::{generate_synthetic, SyntheticSpec};
use graphconsis::eval::{run_experiment, ExperimentConfig};
use graphconsis::inconsistency::{relation_report, ReportOptions};

fn main() -> graphconsis::Result<()> {
    let start = Instant::now();
    let g = generate_synthetic(&SyntheticSpec::default())?;
    let report = relation_report(&g, &ReportOptions::default())?;
    print!("{}", report.to_csv());

    let cfg = ExperimentConfig {
        train_fractions: vec![0.8],
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&g, &cfg)?;
    print!("{}", result.runs_csv());
    print!("{}", result.grid_csv());
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
