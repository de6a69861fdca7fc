//! Loads a JSON experiment for a linear system with an uncertain parameter,
//! runs it under extremal noise and compares the three bounding boxes.
//!
//! ```text
//! cargo run --example uncertain_linear [config.json]
//! ```

use std::path::PathBuf;

use zonobs::cli::config::RunConfig;
use zonobs::prelude::*;

fn main() -> zonobs::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/uncertain_linear.json"));
    let prepared = RunConfig::load(&path)?.prepare()?;
    let trace = simkit::run_experiment(&prepared.model, &prepared.bounds, &prepared.experiment, prepared.model_id)?;

    let synthesis = &trace.metadata.synthesis;
    println!("model {} (lambda = {})", trace.metadata.model_id, trace.metadata.lambda);
    println!("gain L = {:?}", synthesis.gain);
    println!("{} steps, all contained: {}", trace.records.len(), trace.all_contained());
    let from = prepared.experiment.horizon / 2;
    let w = trace.mean_widths(from).expect("non-empty trace");
    println!("mean widths for k >= {from}:");
    for i in 0..w.p.len() {
        println!("  x{}: p {:.5}  z {:.5}  fused {:.5}", i + 1, w.p[i], w.z[i], w.fused[i]);
    }
    Ok(())
}
