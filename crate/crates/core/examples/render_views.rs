//! Renders a textured quadruped from a ring of cameras into PNG files.
//!
//! cargo run --release --example render_views -- views

use meshstyle::asset_io::{save_mask, save_texture};
use meshstyle::render::{camera_ring, render_all};
use meshstyle::synth::{quadruped, QuadrupedParams};

fn main() -> meshstyle::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "views".to_string());
    let dir = std::path::Path::new(&dir);
    std::fs::create_dir_all(dir).expect("output directory");
    let asset = quadruped(&QuadrupedParams::random(4));
    let cams = camera_ring(&asset.mesh, 6, 20.0, 256)?;
    for (i, view) in render_all(&asset.mesh, Some(&asset.texture), &cams)?.iter().enumerate() {
        save_texture(&view.rgb, dir.join(format!("view_{i:03}.png")))?;
        save_mask(&view.mask, dir.join(format!("mask_{i:03}.png")))?;
        println!("view {i}: {} covered pixels", view.mask.count());
    }
    Ok(())
}
