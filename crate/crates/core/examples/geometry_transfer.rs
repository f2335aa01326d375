//! Warps one quadruped toward another and reports the distance before and
//! after.
//!
//! cargo run --release --example geometry_transfer

use meshstyle::asset_io::RunConfig;
use meshstyle::metrics::{chamfer_l1, sample_surface};
use meshstyle::pipeline::{transfer_geometry, Asset};
use meshstyle::synth::{quadruped, QuadrupedParams};

fn main() -> meshstyle::Result<()> {
    let source: Asset = quadruped(&QuadrupedParams::random(1)).into();
    let target: Asset = quadruped(&QuadrupedParams::random(2)).into();
    let cfg = RunConfig::default();
    let geo = transfer_geometry(&source, &target, &cfg)?;
    let warped = sample_surface(&geo.mesh, &source.labels, cfg.sample_count, 7)?;
    println!(
        "chamfer L1 before {:.5}, after {:.5}",
        chamfer_l1(&geo.source_points.points, &geo.target_points.points)?,
        chamfer_l1(&warped.points, &geo.target_points.points)?
    );
    println!(
        "{} iterations, best geometric loss {:.6e} ({:?})",
        geo.trace.iterations, geo.trace.best_total, geo.trace.stop_reason
    );
    Ok(())
}
