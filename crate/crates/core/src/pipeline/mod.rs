//! End-to-end runs: geometry transfer, texture transfer and the joint
//! geometry + texture loop, plus run manifests.

mod assets;
mod manifest;
mod stylize;

pub use assets::{check_part_alphabets, load_asset, Asset, DEFAULT_PART};
pub use manifest::{file_sha256, InputDigest, PhaseTiming, RunManifest};
pub use stylize::{
    ledger_to_json, part_ellipsoids, render_style_loss, sample_pair, shared_cameras, stylize_joint,
    transfer_geometry, transfer_texture, GeometryTransfer, LedgerEntry, StylizeResult, TextureTransfer,
};
