//! Zonotope set operations: affine images, Minkowski sums, order reduction,
//! interval hulls and point membership.
//!
//! ```text
//! cargo run --example zonotope_basics
//! ```

use nalgebra::{dmatrix, dvector};
use zonobs::prelude::*;

fn main() -> zonobs::Result<()> {
    // A skewed parallelogram around (1, 0).
    let z = Zonotope::new(dvector![1.0, 0.0], dmatrix![1.0, 0.5; 0.0, 0.5])?;
    println!("Z has dimension {} and order {}", z.dim(), z.order());

    // Rotate by 90° and shift.
    let rot = dmatrix![0.0, -1.0; 1.0, 0.0];
    let image = z.affine_map(&rot, &dvector![0.0, 2.0])?;
    println!("rotated center: {:?}", image.center().as_slice());

    // Adding a small box grows the order by the number of box generators.
    let noise = Zonotope::from_box(dvector![0.0, 0.0], &dvector![0.1, 0.1]);
    let sum = image.minkowski_sum(&noise)?;
    println!("sum order: {}", sum.order());

    // Reduce a many-generator zonotope down to order 3. The interval hull is
    // preserved exactly.
    let many = Zonotope::new(
        dvector![0.0, 0.0],
        dmatrix![1.0, 0.3, -0.2, 0.05, 0.01, 0.4;
                 0.2, -0.6, 0.1, 0.02, -0.03, 0.4],
    )?;
    let reduced = many.reduce(3)?;
    println!("reduced order {} -> {}", many.order(), reduced.order());
    println!("hull radius before: {:?}", many.hull_radius().as_slice());
    println!("hull radius after : {:?}", reduced.hull_radius().as_slice());

    let hull = z.interval_hull();
    println!("hull of Z: lower {:?}, upper {:?}", hull.lower().as_slice(), hull.upper().as_slice());

    // Membership is exact, not a hull test: (2.4, 0.1) lies in the hull but not in Z.
    for x in [dvector![1.0, 0.0], dvector![2.4, 0.45], dvector![2.4, 0.1]] {
        println!("{:?}: in hull {}, in Z {}", x.as_slice(), hull.contains(&x), z.contains_point(&x));
    }
    Ok(())
}
