//! On-disk formats: meshes, textures, part labels and run configuration.

mod config;
mod labels;
mod mesh;
mod texture;

pub use config::{load_config, RunConfig};
pub use labels::{load_part_labels, parse_part_labels, save_part_labels, PartLabeling};
pub use mesh::{bounding_box, load_mesh, parse_obj, save_mesh, triangle_area, Face, TexturedMesh};
pub use texture::{load_texture, save_mask, save_texture, Mask, TextureImage};
