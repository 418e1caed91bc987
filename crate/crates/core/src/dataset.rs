//! Paired LR/HR scene datasets and the on-disk layout
//! `<dir>/<id>_lr.png`, `<dir>/<id>_hr.png`, `<dir>/manifest.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{load_image, Image};

/// Allowed gap between manifest scale and the per-pair inferred ratio.
pub const SCALE_TOLERANCE: f64 = 0.05;

/// An aligned LR/HR pair. `scale` is the HR/LR linear size ratio inferred
/// from the actual dimensions.
#[derive(Clone, Debug)]
pub struct PairedScene {
    pub id: String,
    pub lr: Image,
    pub hr: Image,
    pub scale: f64,
}

impl PairedScene {
    pub fn new(id: impl Into<String>, lr: Image, hr: Image) -> Result<Self> {
        let scale_x = hr.width() as f64 / lr.width() as f64;
        let scale_y = hr.height() as f64 / lr.height() as f64;
        let scale = 0.5 * (scale_x + scale_y);
        if scale <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "scale ratio {scale:.4} must exceed 1"
            )));
        }
        let wd = (hr.width() as f64 - (scale * lr.width() as f64).round()).abs();
        let hd = (hr.height() as f64 - (scale * lr.height() as f64).round()).abs();
        if wd > 1.0 || hd > 1.0 {
            return Err(Error::DimensionMismatch(format!(
                "pair dimensions {}x{} / {}x{} inconsistent with ratio {scale:.4}",
                hr.width(),
                hr.height(),
                lr.width(),
                lr.height()
            )));
        }
        Ok(Self {
            id: id.into(),
            lr,
            hr,
            scale,
        })
    }
}

/// Train/validation/test partition by scene id.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<Split>,
}

/// An ordered collection of paired scenes plus a split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub pairs: Vec<PairedScene>,
    pub split: Split,
    /// Scale declared by the manifest, if one was present.
    pub nominal_scale: Option<f64>,
}

impl Dataset {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    fn subset(&self, ids: &[String]) -> Vec<&PairedScene> {
        self.pairs
            .iter()
            .filter(|p| ids.iter().any(|id| *id == p.id))
            .collect()
    }

    pub fn train_pairs(&self) -> Vec<&PairedScene> {
        self.subset(&self.split.train)
    }

    pub fn val_pairs(&self) -> Vec<&PairedScene> {
        self.subset(&self.split.val)
    }

    pub fn test_pairs(&self) -> Vec<&PairedScene> {
        self.subset(&self.split.test)
    }

    /// Scale to use for synthetic degradation of this dataset.
    pub fn working_scale(&self) -> Option<f64> {
        self.nominal_scale
            .or_else(|| self.pairs.first().map(|p| p.scale))
    }
}

/// Default split used when the manifest does not provide one: the last five
/// ids (sorted) form the test set, the five before them validation, the rest
/// training. Datasets with fewer than 11 scenes go entirely to training.
fn default_split(ids: &[String]) -> Split {
    if ids.len() < 11 {
        return Split {
            train: ids.to_vec(),
            ..Split::default()
        };
    }
    let n = ids.len();
    Split {
        train: ids[..n - 10].to_vec(),
        val: ids[n - 10..n - 5].to_vec(),
        test: ids[n - 5..].to_vec(),
    }
}

fn validate_split(split: &Split, ids: &[String]) -> std::result::Result<(), String> {
    let mut seen = BTreeMap::new();
    for (name, group) in [
        ("train", &split.train),
        ("val", &split.val),
        ("test", &split.test),
    ] {
        for id in group {
            if !ids.contains(id) {
                return Err(format!("split id {id:?} has no scene"));
            }
            if let Some(prev) = seen.insert(id.clone(), name) {
                return Err(format!("id {id:?} appears in both {prev} and {name}"));
            }
        }
    }
    if seen.len() != ids.len() {
        let missing: Vec<_> = ids.iter().filter(|id| !seen.contains_key(*id)).collect();
        return Err(format!("split does not cover ids {missing:?}"));
    }
    Ok(())
}

/// Load every `<id>_lr.png` / `<id>_hr.png` pair in `dir`, sorted by id.
///
/// An orphan LR or HR file is an error. When `manifest.json` exists, its
/// scale must match each pair's inferred ratio within ±0.05 and its splits
/// (if present) must partition the ids exactly.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Read {
        path: dir.into(),
        source,
    })?;

    let mut lr_ids: Vec<String> = Vec::new();
    let mut hr_ids: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| Error::Read {
            path: dir.into(),
            source,
        })?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name.strip_suffix("_lr.png") {
            lr_ids.push(id.to_string());
        } else if let Some(id) = name.strip_suffix("_hr.png") {
            hr_ids.push(id.to_string());
        }
    }
    lr_ids.sort();
    hr_ids.sort();

    for id in &lr_ids {
        if !hr_ids.contains(id) {
            return Err(Error::OrphanScene {
                id: id.clone(),
                missing: "hr",
            });
        }
    }
    for id in &hr_ids {
        if !lr_ids.contains(id) {
            return Err(Error::OrphanScene {
                id: id.clone(),
                missing: "lr",
            });
        }
    }

    let manifest_path = dir.join("manifest.json");
    let manifest: Option<Manifest> = if manifest_path.exists() {
        let text = std::fs::read_to_string(&manifest_path).map_err(|source| Error::Read {
            path: manifest_path.clone(),
            source,
        })?;
        Some(
            serde_json::from_str(&text).map_err(|e| Error::Manifest {
                path: manifest_path.clone(),
                reason: e.to_string(),
            })?,
        )
    } else {
        None
    };

    let mut pairs = Vec::with_capacity(lr_ids.len());
    for id in &lr_ids {
        let lr = load_image(dir.join(format!("{id}_lr.png")))?;
        let hr = load_image(dir.join(format!("{id}_hr.png")))?;
        let pair = PairedScene::new(id.clone(), lr, hr)?;
        if let Some(m) = &manifest {
            if (pair.scale - m.scale).abs() > SCALE_TOLERANCE {
                return Err(Error::ScaleMismatch {
                    id: id.clone(),
                    manifest: m.scale,
                    inferred: pair.scale,
                });
            }
        }
        pairs.push(pair);
    }

    let split = match manifest.as_ref().and_then(|m| m.splits.clone()) {
        Some(s) => {
            validate_split(&s, &lr_ids).map_err(|reason| Error::Manifest {
                path: manifest_path.clone(),
                reason,
            })?;
            s
        }
        None => default_split(&lr_ids),
    };

    Ok(Dataset {
        pairs,
        split,
        nominal_scale: manifest.map(|m| m.scale),
    })
}
