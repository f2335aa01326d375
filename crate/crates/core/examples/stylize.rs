//! Joint geometry and texture stylization of one quadruped toward another,
//! printing the per-step loss ledger.
//!
//! cargo run --release --example stylize

use meshstyle::asset_io::RunConfig;
use meshstyle::pipeline::{render_style_loss, shared_cameras, stylize_joint, Asset};
use meshstyle::synth::{quadruped, QuadrupedParams};

fn main() -> meshstyle::Result<()> {
    let source: Asset = quadruped(&QuadrupedParams::random(1)).into();
    let target: Asset = quadruped(&QuadrupedParams::random(2)).into();
    let cfg = RunConfig {
        image_resolution: 128,
        ..RunConfig::default()
    };
    let r = stylize_joint(&source, &target, &cfg)?;
    for e in &r.ledger {
        println!(
            "step {:>2}: total {:.5} = geometric {:.5} + content {:.5} + style {:.5}",
            e.step, e.total, e.geometric, e.content, e.style
        );
    }
    println!("best step {:?}", r.best_step);
    let cams = shared_cameras(&source.mesh, &target.mesh, &cfg)?;
    let before = render_style_loss(&source.mesh, source.texture()?, &target, &cams, cfg.pyramid_levels)?;
    let after = render_style_loss(&r.mesh, &r.texture, &target, &cams, cfg.pyramid_levels)?;
    println!("style loss against the target: source {before:.4}, stylized {after:.4}");
    Ok(())
}
