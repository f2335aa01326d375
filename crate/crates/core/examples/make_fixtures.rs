//! Writes a pair of procedural quadrupeds (OBJ, MTL, PNG, part labels) for
//! trying the command-line tool.
//!
//! cargo run --example make_fixtures -- fixtures

use meshstyle::synth::{quadruped, QuadrupedParams};

fn main() -> meshstyle::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures".to_string());
    let dir = std::path::Path::new(&dir);
    for (stem, seed) in [("source", 1), ("target", 2)] {
        let files = quadruped(&QuadrupedParams::random(seed)).write(dir, stem)?;
        println!("{} (labels {})", files.mesh.display(), files.labels.display());
    }
    Ok(())
}
