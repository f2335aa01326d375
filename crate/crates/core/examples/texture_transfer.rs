//! Closed-form color transfer between two textured quadrupeds.
//!
//! cargo run --example texture_transfer -- out.png

use meshstyle::asset_io::save_texture;
use meshstyle::pipeline::{transfer_texture, Asset};
use meshstyle::synth::{quadruped, QuadrupedParams};
use meshstyle::texture_style::image_stats;

fn main() -> meshstyle::Result<()> {
    let source: Asset = quadruped(&QuadrupedParams::random(1)).into();
    let target: Asset = quadruped(&QuadrupedParams::random(2)).into();
    let tex = transfer_texture(&source, &target)?;
    let before = image_stats(source.texture()?, &tex.coverage)?;
    let after = image_stats(&tex.texture, &tex.coverage)?;
    println!("color transform: {}", tex.transform.to_json());
    println!("mean before {:.3?}, after {:.3?}", before.mean, after.mean);
    if let Some(path) = std::env::args().nth(1) {
        save_texture(&tex.texture, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
