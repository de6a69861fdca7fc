//! Runs the pendulum experiment, writes the trace as CSV and renders SVG
//! plots of both state components.
//!
//! ```text
//! cargo run --example plot_trace [out_dir]
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use zonobs::cli::plot::{write_plots, PlotStyle};
use zonobs::cli::trace_csv;
use zonobs::prelude::*;

fn main() -> zonobs::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/plot_trace"));
    std::fs::create_dir_all(&out)?;

    let (model, bounds, experiment) = simkit::pendulum_experiment();
    let trace = simkit::run_experiment(&model, &bounds, &experiment, "pendulum")?;
    let csv = out.join("trace.csv");
    trace_csv::write_trace(BufWriter::new(File::create(&csv)?), &trace)?;
    println!("wrote {}", csv.display());

    let table = trace_csv::read_trace(File::open(&csv)?)?;
    for style in [PlotStyle::Bounds, PlotStyle::Fused] {
        for path in write_plots(&table, &out, "trace", style)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
