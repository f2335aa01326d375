//! Blend weights of a few points between two part ellipsoids.
//!
//! cargo run --example blend_field

use meshstyle::part_field::{blend_weights, Ellipsoid};
use meshstyle::Vec3;

fn main() {
    let ells = [
        Ellipsoid::sphere(Vec3::new(-1.0, 0.0, 0.0), 0.5),
        Ellipsoid::sphere(Vec3::new(1.0, 0.0, 0.0), 0.5),
    ];
    for x in [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 40.0] {
        let w = blend_weights(&Vec3::new(x, 0.0, 0.0), &ells, 4.0);
        println!("x = {x:>5}: weights {:.4?}", w.as_slice());
    }
}
