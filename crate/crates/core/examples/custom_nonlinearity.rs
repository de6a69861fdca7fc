//! Plugs a user-defined nonlinearity into the estimator.
//!
//! The system is a damped oscillator with a saturating spring,
//! `f(x) = [0, −h·k·tanh(x₁)]`. The Jacobian entry `−h·k·sech²(x₁)` is
//! monotone on each side of 0, which gives a tight enclosure over a box.
//!
//! ```text
//! cargo run --example custom_nonlinearity
//! ```

use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use zonobs::model::Nonlinearity;
use zonobs::prelude::*;

#[derive(Debug)]
struct SoftSpring {
    gain: f64,
}

fn sech2(x: f64) -> f64 {
    1.0 - x.tanh().powi(2)
}

impl Nonlinearity for SoftSpring {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        dvector![0.0, -self.gain * x[0].tanh()]
    }

    fn jacobian_enclosure(&self, domain: &BoxSet) -> zonobs::Result<IntervalMatrix> {
        let (lo, hi) = (domain.lower()[0], domain.upper()[0]);
        // sech² peaks at 0 and decreases in |x|.
        let max = if lo <= 0.0 && hi >= 0.0 { 1.0 } else { sech2(lo).max(sech2(hi)) };
        let min = sech2(lo).min(sech2(hi));
        let d21 = Interval::new(min, max).scale(-self.gain);
        Ok(IntervalMatrix::from_fn(2, 2, |i, j| if (i, j) == (1, 0) { d21 } else { Interval::point(0.0) }))
    }
}

fn main() -> zonobs::Result<()> {
    let h = 0.05;
    let gain = h * 0.8;
    let model = SystemModel::new(
        dmatrix![0.99, h; 0.0, 0.98],
        DMatrix::zeros(2, 0),
        dmatrix![1.0, 0.0],
        DMatrix::identity(2, 2),
        dmatrix![1.0],
        Arc::new(SoftSpring { gain }),
        // sech² ∈ (0, 1], so the global Jacobian range is [−gain, 0].
        IntervalMatrix::new(dmatrix![0.0, 0.0; -gain, 0.0], DMatrix::zeros(2, 2))?,
    )?;
    let bounds = UncertaintyBounds {
        w_bar: dvector![0.002, 0.002],
        v_bar: dvector![0.01],
        x0_center: dvector![0.0, 0.0],
        x0_radius: dvector![1.0, 1.0],
    };
    let mut experiment = simkit::pendulum_experiment().2;
    experiment.x0 = dvector![0.8, -0.3];
    experiment.noise = NoiseSpec::from_bounds(&bounds, 3, NoiseDistribution::Uniform);
    experiment.horizon = 150;

    let synthesis = synthesize(&model, &bounds, &experiment.synthesis)?;
    println!("gain L = {:?}", synthesis.gain.as_slice());
    let trace = simkit::run_with_gain(&model, &bounds, &synthesis, &experiment, "soft-spring")?;
    println!("all contained: {}", trace.all_contained());
    for r in trace.records.iter().step_by(30) {
        let b = &r.output.box_fused;
        println!("k={:>3}  x1={:>8.4} in [{:>8.4}, {:>8.4}]", r.k, r.x_true[0], b.lower()[0], b.upper()[0]);
    }
    Ok(())
}
