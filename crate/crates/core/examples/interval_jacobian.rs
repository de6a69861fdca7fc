//! Interval arithmetic, Jacobian enclosures over a box, and the zonotope
//! that encloses an interval matrix image `{p + J·ξ}`.
//!
//! ```text
//! cargo run --example interval_jacobian
//! ```

use nalgebra::dvector;
use zonobs::interval::jacobian_range;
use zonobs::prelude::*;

fn main() -> zonobs::Result<()> {
    let a = Interval::new(-0.5, 1.0);
    let b = Interval::new(2.0, 3.0);
    println!("{a} + {b} = {}", a + b);
    println!("{a} * {b} = {}", a * b);
    println!("sin{a} = {}", a.sin());
    println!("cos{a} = {}", a.cos());

    // The pendulum Jacobian only depends on the angle x1.
    let model = SystemModel::pendulum(0.065, 0.1);
    for half_width in [0.01, 0.5, 2.0] {
        let domain = BoxSet::centered(&dvector![0.3, 0.0], &dvector![half_width, 1.0])?;
        let jac = jacobian_range(&model, &domain)?;
        println!("x1 in 0.3 ± {half_width}: dF21 in {}", jac.get(1, 0));
    }

    // Enclose {p + J·ξ : J ∈ [J], |ξ| ≤ 1} by a zonotope.
    let domain = BoxSet::centered(&dvector![0.3, 0.0], &dvector![0.5, 1.0])?;
    let jac = jacobian_range(&model, &domain)?;
    let z = zonotope_inclusion(&dvector![0.0, 0.0], &jac)?;
    println!("inclusion generators ({} columns):\n{:.5}", z.order(), z.generators());
    Ok(())
}
