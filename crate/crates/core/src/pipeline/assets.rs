use std::path::{Path, PathBuf};

use crate::asset_io::{load_mesh, load_part_labels, load_texture, PartLabeling, TextureImage, TexturedMesh};
use crate::error::{Error, Result};
use crate::synth::SynthAsset;

/// A mesh with its part labels and, when available, its texture.
#[derive(Debug, Clone)]
pub struct Asset {
    pub mesh: TexturedMesh,
    pub labels: PartLabeling,
    pub texture: Option<TextureImage>,
    /// Files the asset was read from, for run manifests.
    pub files: Vec<PathBuf>,
}

/// Name of the single part used when no labels are supplied.
pub const DEFAULT_PART: &str = "all";

impl Asset {
    pub fn texture(&self) -> Result<&TextureImage> {
        self.texture
            .as_ref()
            .ok_or_else(|| Error::invalid("mesh has no texture (no map_Kd in its material library)"))
    }
}

impl From<SynthAsset> for Asset {
    fn from(a: SynthAsset) -> Self {
        Self {
            mesh: a.mesh,
            labels: a.labels,
            texture: Some(a.texture),
            files: Vec::new(),
        }
    }
}

/// Loads a mesh, its labels (one part covering every face when `labels` is
/// `None`) and the texture named by its material, if any.
pub fn load_asset(mesh_path: &Path, labels: Option<&Path>) -> Result<Asset> {
    let mesh = load_mesh(mesh_path)?;
    let mut files = vec![mesh_path.to_path_buf()];
    let labels = match labels {
        Some(p) => {
            files.push(p.to_path_buf());
            load_part_labels(p, &mesh)?
        }
        None => PartLabeling::uniform(DEFAULT_PART, mesh.faces.len()),
    };
    let texture = match &mesh.texture {
        Some(p) => {
            files.push(p.clone());
            Some(load_texture(p)?)
        }
        None => None,
    };
    Ok(Asset {
        mesh,
        labels,
        texture,
        files,
    })
}

/// Both assets must label the same parts in the same order.
pub fn check_part_alphabets(source: &Asset, target: &Asset) -> Result<()> {
    if source.labels.part_names != target.labels.part_names {
        return Err(Error::Labels(format!(
            "source parts {:?} do not match target parts {:?}",
            source.labels.part_names, target.labels.part_names
        )));
    }
    Ok(())
}
