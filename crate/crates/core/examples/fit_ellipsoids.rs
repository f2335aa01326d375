//! Fits and refines one ellipsoid per part of a procedural quadruped.
//!
//! cargo run --release --example fit_ellipsoids

use meshstyle::asset_io::RunConfig;
use meshstyle::metrics::sample_surface;
use meshstyle::part_field::ellipsoids_to_json;
use meshstyle::pipeline::{part_ellipsoids, Asset};
use meshstyle::synth::{quadruped, QuadrupedParams};

fn main() -> meshstyle::Result<()> {
    let asset: Asset = quadruped(&QuadrupedParams::random(3)).into();
    let cfg = RunConfig::default();
    let points = sample_surface(&asset.mesh, &asset.labels, cfg.sample_count, cfg.random_seed)?;
    let ells = part_ellipsoids(&asset, &points, &cfg)?;
    println!("{}", ellipsoids_to_json(&ells, &asset.labels.part_names));
    Ok(())
}
