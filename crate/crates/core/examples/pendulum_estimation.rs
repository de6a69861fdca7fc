//! Runs the reference pendulum experiment and prints the interval estimates
//! every 20 steps together with the steady-state widths of the three boxes.
//!
//! ```text
//! cargo run --example pendulum_estimation
//! ```

use zonobs::prelude::*;

fn main() -> zonobs::Result<()> {
    let (model, bounds, experiment) = simkit::pendulum_experiment();
    let gain = synthesize(&model, &bounds, &experiment.synthesis)?;
    let trace = simkit::run_with_gain(&model, &bounds, &gain, &experiment, "pendulum")?;

    println!("{:>4} {:>9} {:>21} {:>9} {:>21}", "k", "x1", "fused x1", "x2", "fused x2");
    for r in trace.records.iter().step_by(20) {
        let b = &r.output.box_fused;
        println!(
            "{:>4} {:>9.4} [{:>8.4}, {:>8.4}] {:>9.4} [{:>8.4}, {:>8.4}]",
            r.k,
            r.x_true[0],
            b.lower()[0],
            b.upper()[0],
            r.x_true[1],
            b.lower()[1],
            b.upper()[1]
        );
    }
    let w = trace.mean_widths(100).expect("horizon is 200");
    println!("steady-state mean widths (k >= 100)");
    println!("  peak-to-peak : {:.4?}", w.p.as_slice());
    println!("  zonotope     : {:.4?}", w.z.as_slice());
    println!("  fused        : {:.4?}", w.fused.as_slice());
    println!("all contained: {}, min phi margin: {:.4}", trace.all_contained(), trace.min_phi_margin());
    Ok(())
}
