//! Distances between two procedural quadrupeds.
//!
//! cargo run --release --example metrics

use meshstyle::metrics::{
    bbox_diagonal, chamfer_l1, chamfer_l2, f_score, part_distance, sample_surface, symmetry_distance, SymmetryPlane,
};
use meshstyle::synth::{quadruped, QuadrupedParams};

fn main() -> meshstyle::Result<()> {
    let a = quadruped(&QuadrupedParams::random(1));
    let b = quadruped(&QuadrupedParams::random(2));
    let p = sample_surface(&a.mesh, &a.labels, 4096, 0)?;
    let q = sample_surface(&b.mesh, &b.labels, 4096, 0)?;
    let tau = 0.01 * bbox_diagonal(&q.points);
    let fs = f_score(&p.points, &q.points, tau)?;
    let plane = SymmetryPlane::new(meshstyle::Vec3::x(), 0.0).expect("unit normal");
    println!("chamfer L1      {:.5}", chamfer_l1(&p.points, &q.points)?);
    println!("chamfer L2      {:.5}", chamfer_l2(&p.points, &q.points)?);
    println!("part distance   {:.5}", part_distance(&p, &q)?);
    println!("symmetry (a)    {:.5}", symmetry_distance(&p.points, &plane)?);
    println!("F-score @ {tau:.4}  {:.4} (precision {:.4}, recall {:.4})", fs.f_score, fs.precision, fs.recall);
    Ok(())
}
