use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asset_io::TexturedMesh;
use crate::error::{Error, Result};

/// Per-face semantic part ids over an ordered part alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartLabeling {
    pub part_names: Vec<String>,
    pub face_part: Vec<usize>,
}

impl PartLabeling {
    pub fn uniform(name: &str, faces: usize) -> Self {
        Self {
            part_names: vec![name.to_string()],
            face_part: vec![0; faces],
        }
    }

    pub fn part_count(&self) -> usize {
        self.part_names.len()
    }

    pub fn check(&self, mesh: &TexturedMesh) -> Result<()> {
        if self.face_part.len() != mesh.faces.len() {
            return Err(Error::Labels(format!(
                "{} labels for {} faces",
                self.face_part.len(),
                mesh.faces.len()
            )));
        }
        if let Some((f, &p)) = self.face_part.iter().enumerate().find(|(_, &p)| p >= self.part_count()) {
            return Err(Error::Labels(format!("face {f} has part index {p} out of range")));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FaceEntry {
    Index(usize),
    Name(String),
}

#[derive(Deserialize)]
struct LabelDoc {
    parts: Vec<String>,
    face_part: Vec<Option<FaceEntry>>,
}

#[derive(Serialize)]
struct LabelDocOut<'a> {
    parts: &'a [String],
    face_part: &'a [usize],
}

/// Reads a label document: `{"parts": [...], "face_part": [...]}` where each
/// `face_part` entry is a part index, a part name, or `null` for an
/// unlabeled face.
pub fn load_part_labels(path: impl AsRef<Path>, mesh: &TexturedMesh) -> Result<PartLabeling> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_part_labels(&text, mesh)
}

pub fn parse_part_labels(text: &str, mesh: &TexturedMesh) -> Result<PartLabeling> {
    let doc: LabelDoc = serde_json::from_str(text).map_err(|e| Error::Labels(e.to_string()))?;
    if doc.parts.is_empty() {
        return Err(Error::Labels("empty part alphabet".into()));
    }
    let faces = mesh.faces.len();
    if doc.face_part.len() > faces {
        return Err(Error::Labels(format!(
            "{} labels for {faces} faces",
            doc.face_part.len()
        )));
    }

    let mut face_part = Vec::with_capacity(faces);
    let mut missing = Vec::new();
    for f in 0..faces {
        match doc.face_part.get(f) {
            None | Some(None) => missing.push(f),
            Some(Some(FaceEntry::Index(i))) => {
                if *i >= doc.parts.len() {
                    return Err(Error::Labels(format!("face {f}: part index {i} out of range")));
                }
                face_part.push(*i);
            }
            Some(Some(FaceEntry::Name(name))) => {
                let i = doc
                    .parts
                    .iter()
                    .position(|p| p == name)
                    .ok_or_else(|| Error::Labels(format!("face {f}: unknown part '{name}'")))?;
                face_part.push(i);
            }
        }
    }
    if !missing.is_empty() {
        let listed: Vec<String> = missing.iter().take(20).map(|f| f.to_string()).collect();
        let more = if missing.len() > 20 { ", ..." } else { "" };
        return Err(Error::Labels(format!(
            "missing labels for {} faces: {}{more}",
            missing.len(),
            listed.join(", ")
        )));
    }
    Ok(PartLabeling {
        part_names: doc.parts,
        face_part,
    })
}

pub fn save_part_labels(labels: &PartLabeling, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = LabelDocOut {
        parts: &labels.part_names,
        face_part: &labels.face_part,
    };
    let text = serde_json::to_string(&doc).expect("labels serialize");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
