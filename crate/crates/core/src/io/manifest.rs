//! Dataset manifest (JSON, version 1).
//!
//! ```json
//! {"version": 1, "num_classes": 3, "images": [
//!   {"id": "a", "width": 64, "height": 48, "cam": "a_cam.npy",
//!    "features": "a_feat.npy", "gt_mask": "a_mask.png",
//!    "gt_boxes": [[4, 6, 30, 40]], "gt_label": 2, "pred_label": 2,
//!    "rgb": "a.png"}
//! ]}
//! ```
//!
//! Paths are relative to the directory holding the manifest. Boxes are
//! inclusive `[x0, y0, x1, y1]` pixel coordinates. `edges` is an optional
//! extension written by the pseudo-boundary generator.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::box_eval::BBox;
use crate::error::{Error, ManifestError, Result};

pub const MANIFEST_VERSION: i64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub cam: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub features: Option<String>,
    pub gt_mask: String,
    pub gt_boxes: Vec<BBox>,
    pub gt_label: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pred_label: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rgb: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edges: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: i64,
    pub num_classes: usize,
    pub images: Vec<ImageRecord>,
    /// Directory the relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(num_classes: usize, images: Vec<ImageRecord>, base_dir: impl Into<PathBuf>) -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            num_classes,
            images,
            base_dir: base_dir.into(),
        }
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, &base_dir).map_err(|source| Error::Manifest {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Validate a manifest document and check that every referenced file exists
/// under `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Manifest, ManifestError> {
    let root: Value = serde_json::from_str(text)?;
    let root = as_object(&root, "")?;

    let version = required(root, "", "version")?
        .as_i64()
        .ok_or_else(|| invalid("/version", "expected an integer"))?;
    if version != MANIFEST_VERSION {
        return Err(ManifestError::UnknownVersion(version));
    }
    let num_classes = uint(required(root, "", "num_classes")?, "/num_classes")?;
    if num_classes == 0 {
        return Err(invalid("/num_classes", "must be at least 1"));
    }
    let images = required(root, "", "images")?
        .as_array()
        .ok_or_else(|| invalid("/images", "expected an array"))?;

    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(images.len());
    for (i, entry) in images.iter().enumerate() {
        let at = format!("/images/{i}");
        let record = parse_record(entry, &at, num_classes, base_dir)?;
        if !seen.insert(record.id.clone()) {
            return Err(ManifestError::DuplicateId {
                pointer: format!("{at}/id"),
                id: record.id,
            });
        }
        records.push(record);
    }
    Ok(Manifest::new(num_classes, records, base_dir))
}

fn parse_record(
    entry: &Value,
    at: &str,
    num_classes: usize,
    base_dir: &Path,
) -> Result<ImageRecord, ManifestError> {
    let obj = as_object(entry, at)?;
    let id = string(required(obj, at, "id")?, &format!("{at}/id"))?;
    if id.is_empty() {
        return Err(invalid(&format!("{at}/id"), "must be non-empty"));
    }
    let width = uint(required(obj, at, "width")?, &format!("{at}/width"))?;
    let height = uint(required(obj, at, "height")?, &format!("{at}/height"))?;
    if width == 0 || height == 0 {
        return Err(invalid(&format!("{at}/width"), "image size must be non-zero"));
    }

    let file = |key: &str, required_field: bool| -> Result<Option<String>, ManifestError> {
        let pointer = format!("{at}/{key}");
        let value = match obj.get(key) {
            None | Some(Value::Null) if !required_field => return Ok(None),
            None => return Err(ManifestError::MissingField { pointer }),
            Some(v) => string(v, &pointer)?,
        };
        let full = base_dir.join(&value);
        if !full.is_file() {
            return Err(ManifestError::MissingFile { pointer, path: full });
        }
        Ok(Some(value))
    };
    let cam = file("cam", true)?.unwrap_or_default();
    let features = file("features", false)?;
    let gt_mask = file("gt_mask", true)?.unwrap_or_default();
    let rgb = file("rgb", false)?;
    let edges = file("edges", false)?;

    let boxes_at = format!("{at}/gt_boxes");
    let boxes = required(obj, at, "gt_boxes")?
        .as_array()
        .ok_or_else(|| invalid(&boxes_at, "expected an array of [x0, y0, x1, y1]"))?;
    let mut gt_boxes = Vec::with_capacity(boxes.len());
    for (j, b) in boxes.iter().enumerate() {
        let pointer = format!("{boxes_at}/{j}");
        let coords = b
            .as_array()
            .filter(|a| a.len() == 4)
            .ok_or_else(|| invalid(&pointer, "expected [x0, y0, x1, y1]"))?;
        let mut xy = [0usize; 4];
        for (k, v) in coords.iter().enumerate() {
            xy[k] = uint(v, &format!("{pointer}/{k}"))?;
        }
        let [x0, y0, x1, y1] = xy;
        if x0 > x1 || y0 > y1 {
            return Err(invalid(&pointer, "box corners out of order"));
        }
        if x1 >= width || y1 >= height {
            return Err(invalid(&pointer, "box exceeds image bounds"));
        }
        gt_boxes.push(BBox::new(x0, y0, x1, y1));
    }

    let gt_label = uint(required(obj, at, "gt_label")?, &format!("{at}/gt_label"))?;
    if gt_label >= num_classes {
        return Err(invalid(
            &format!("{at}/gt_label"),
            &format!("label {gt_label} not below num_classes {num_classes}"),
        ));
    }
    let pred_label = match obj.get("pred_label") {
        None | Some(Value::Null) => None,
        Some(v) => Some(uint(v, &format!("{at}/pred_label"))?),
    };

    Ok(ImageRecord {
        id,
        width,
        height,
        cam,
        features,
        gt_mask,
        gt_boxes,
        gt_label,
        pred_label,
        rgb,
        edges,
    })
}

fn invalid(pointer: &str, reason: &str) -> ManifestError {
    ManifestError::InvalidField {
        pointer: pointer.to_string(),
        reason: reason.to_string(),
    }
}

fn as_object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>, ManifestError> {
    v.as_object().ok_or_else(|| invalid(if at.is_empty() { "/" } else { at }, "expected an object"))
}

fn required<'a>(obj: &'a Map<String, Value>, at: &str, key: &str) -> Result<&'a Value, ManifestError> {
    obj.get(key).ok_or_else(|| ManifestError::MissingField {
        pointer: format!("{at}/{key}"),
    })
}

fn uint(v: &Value, pointer: &str) -> Result<usize, ManifestError> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| invalid(pointer, "expected a non-negative integer"))
}

fn string(v: &Value, pointer: &str) -> Result<String, ManifestError> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| invalid(pointer, "expected a string"))
}
