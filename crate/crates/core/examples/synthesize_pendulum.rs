//! Designs the observer gain for the reference pendulum and prints the
//! certificate, the peak-to-peak schedule and the decision variables.
//!
//! ```text
//! cargo run --example synthesize_pendulum
//! ```

use zonobs::prelude::*;

fn main() -> zonobs::Result<()> {
    let (model, bounds, experiment) = simkit::pendulum_experiment();
    let result = synthesize(&model, &bounds, &experiment.synthesis)?;

    println!("solver status : {} ({} iterations)", result.solver_status, result.iterations);
    println!("vertices      : {}", result.vertex_count);
    println!("mu_w, mu_v    : {:.4}, {:.4}", result.mu_w(), result.mu_v());
    println!("gain L        : {:.5?}", result.gain.as_slice());
    println!("P             :{:.5}", result.p());
    println!("certificate   : {:?}", result.certificate);

    for rule in [V0Bound::BoxVertices, V0Bound::RadiusVector] {
        let phi = PhiSchedule::new(&result, &bounds, &rule)?;
        println!("{rule:?}: phi_0 = {:.4}, phi_inf = {:.4}", phi.at(0), phi.limit());
    }
    Ok(())
}
