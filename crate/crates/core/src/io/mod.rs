//! On-disk formats: dataset manifest, per-image cell CSVs, the feature
//! table and training checkpoints.

mod checkpoint;
mod tables;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{sidecar_path, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tables::{
    dataset_from_features, dataset_from_synth, extract_features, read_cells_csv, read_features_csv, write_cells_csv, write_features_csv,
    FeatureRow,
};

use crate::synth::{DatasetSpec, SynthImage};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}: {msg}")]
    Malformed { path: PathBuf, line: u64, msg: String },
    #[error("{path}: {msg}")]
    Json { path: PathBuf, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },
    #[error("checkpoint {path}: format version {found} is not supported (expected {expected})")]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub patch_id: u32,
    pub row: u32,
    pub col: u32,
    pub x0: f64,
    pub y0: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub label: usize,
    pub grid: [u32; 2],
    /// Cell CSV path relative to the manifest directory.
    pub cells: String,
    pub patches: Vec<PatchEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub class_names: Vec<String>,
    pub images: Vec<ImageEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| IoError::Json { path: path.to_path_buf(), msg: e.to_string() })?;
        m.validate(path)?;
        Ok(m)
    }

    pub fn validate(&self, path: &Path) -> Result<(), IoError> {
        let invalid = |msg: String| Err(IoError::Invalid { path: path.to_path_buf(), msg });
        let mut ids: Vec<&str> = self.images.iter().map(|i| i.image_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate image id {}", w[0]));
        }
        if let Some(img) = self.images.iter().find(|i| i.label >= self.class_names.len()) {
            return invalid(format!("image {} has label {} but only {} classes", img.image_id, img.label, self.class_names.len()));
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(io_err(path))
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageEntry> {
        self.images.iter().find(|i| i.image_id == image_id)
    }
}

/// Writes `manifest.json` plus one cell CSV per image under `dir`.
pub fn write_dataset(dir: &Path, spec: &DatasetSpec, images: &[SynthImage]) -> Result<Manifest, IoError> {
    let cells_dir = dir.join("cells");
    std::fs::create_dir_all(&cells_dir).map_err(io_err(&cells_dir))?;
    let mut entries = Vec::with_capacity(images.len());
    for img in images {
        let rel = format!("cells/{}.csv", img.image_id);
        write_cells_csv(&dir.join(&rel), img)?;
        entries.push(ImageEntry {
            image_id: img.image_id.clone(),
            label: img.label,
            grid: [spec.grid_rows as u32, spec.grid_cols as u32],
            cells: rel,
            patches: img
                .patches
                .iter()
                .map(|p| PatchEntry { patch_id: p.patch_id, row: p.row, col: p.col, x0: p.rect.xmin, y0: p.rect.ymin, size: spec.patch_size })
                .collect(),
        });
    }
    let manifest = Manifest {
        name: spec.name.clone(),
        class_names: spec.classes.iter().map(|c| c.name.clone()).collect(),
        images: entries,
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}
