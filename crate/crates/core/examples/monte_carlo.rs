//! Runs a batch of seeded pendulum experiments in parallel and reports the
//! containment rate and average box widths.
//!
//! ```text
//! cargo run --release --example monte_carlo [runs]
//! ```

use zonobs::prelude::*;

fn main() -> zonobs::Result<()> {
    let runs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let (model, bounds, experiment) = simkit::pendulum_experiment();
    let gain = synthesize(&model, &bounds, &experiment.synthesis)?;
    let (report, traces) = simkit::monte_carlo(&model, &bounds, &gain, &experiment, "pendulum", runs, 1000)?;

    println!("{} runs, {} failed", traces.len(), report.failures.len());
    println!("containment rate : {:.4}", report.containment_rate);
    println!("min phi margin   : {:.4}", report.min_phi_margin);
    // The report holds ensemble-mean widths per step; average the tail k >= 100.
    let tail = |per_step: &[Vec<f64>]| -> Vec<f64> {
        let rows = &per_step[100.min(per_step.len() - 1)..];
        let n = rows.len() as f64;
        (0..rows[0].len()).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n).collect()
    };
    println!("steady-state widths (k >= 100)");
    println!("  peak-to-peak : {:.4?}", tail(&report.mean_width_p));
    println!("  zonotope     : {:.4?}", tail(&report.mean_width_z));
    println!("  fused        : {:.4?}", tail(&report.mean_width_fused));
    Ok(())
}
