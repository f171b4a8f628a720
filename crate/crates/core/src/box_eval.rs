//! Box-based localization accuracy.
//!
//! A map is thresholded at a fraction of its maximum, the largest connected
//! component is boxed, and the box is scored against the ground-truth boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid, ScoreMap};

pub const DEFAULT_BOX_THRESHOLD: f64 = 0.2;
pub const DEFAULT_IOU_MIN: f64 = 0.5;

/// Axis-aligned box with inclusive pixel coordinates. Serialized as
/// `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl From<[usize; 4]> for BBox {
    fn from([x0, y0, x1, y1]: [usize; 4]) -> Self {
        BBox { x0, y0, x1, y1 }
    }
}

impl From<BBox> for [usize; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl BBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        BBox { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.x0..=self.x1).contains(&col) && (self.y0..=self.y1).contains(&row)
    }
}

pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let ix0 = a.x0.max(b.x0);
    let iy0 = a.y0.max(b.y0);
    let ix1 = a.x1.min(b.x1);
    let iy1 = a.y1.min(b.y1);
    if ix0 > ix1 || iy0 > iy1 {
        return 0.0;
    }
    let inter = (ix1 - ix0 + 1) * (iy1 - iy0 + 1);
    inter as f64 / (a.area() + b.area() - inter) as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::InvalidArgument(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    /// 0 is background; components are `1..=sizes.len()`.
    pub labels: Grid<u32>,
    /// `sizes[i]` is the pixel count of label `i + 1`.
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Tight box around one label.
    pub fn bbox(&self, label: u32) -> Option<BBox> {
        let mut b: Option<BBox> = None;
        for r in 0..self.labels.height() {
            for c in 0..self.labels.width() {
                if self.labels.get(r, c) != label {
                    continue;
                }
                b = Some(match b {
                    None => BBox::new(c, r, c, r),
                    Some(b) => BBox::new(b.x0.min(c), b.y0.min(r), b.x1.max(c), b.y1.max(r)),
                });
            }
        }
        b
    }

    /// Largest component; equal sizes go to the lower label, i.e. the one
    /// whose first pixel comes first in row-major order.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(usize, u32)> = None;
        for (i, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, i as u32 + 1));
            }
        }
        best.map(|(_, l)| l)
    }
}

/// Labels in first-encounter row-major order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let (h, w) = mask.dims();
    let mut labels = Grid::filled(h, w, 0u32);
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) || labels.get(r, c) != 0 {
                continue;
            }
            let label = sizes.len() as u32 + 1;
            let mut size = 0;
            labels.set(r, c, label);
            stack.push((r, c));
            while let Some((pr, pc)) = stack.pop() {
                size += 1;
                for &(dr, dc) in connectivity.offsets() {
                    let (nr, nc) = (pr as isize + dr, pc as isize + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    if mask.get(nr, nc) && labels.get(nr, nc) == 0 {
                        labels.set(nr, nc, label);
                        stack.push((nr, nc));
                    }
                }
            }
            sizes.push(size);
        }
    }
    ComponentLabeling { labels, sizes }
}

/// Box around the largest component of `map >= box_threshold * max(map)`.
/// `None` when the map has no positive value.
pub fn infer_box(map: &ScoreMap, box_threshold: f64, connectivity: Connectivity) -> Option<BBox> {
    let max = map.values().iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return None;
    }
    let cut = box_threshold * max;
    let mask = BinaryMask(map.grid().map(|&v| v >= cut));
    let labeling = connected_components(&mask, connectivity);
    labeling.largest().and_then(|l| labeling.bbox(l))
}

pub fn check_box_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("box threshold must lie in (0, 1), got {t}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AccuracyMode {
    /// Predicted label must match and the box must hit.
    Top1,
    /// Only the box must hit.
    #[default]
    GtKnown,
}

/// What box accuracy needs from one image.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSample {
    pub id: String,
    pub map: ScoreMap,
    pub gt_boxes: Vec<BBox>,
    pub gt_label: usize,
    pub pred_label: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxParams {
    pub box_threshold: f64,
    pub iou_min: f64,
    pub connectivity: Connectivity,
}

impl Default for BoxParams {
    fn default() -> Self {
        BoxParams {
            box_threshold: DEFAULT_BOX_THRESHOLD,
            iou_min: DEFAULT_IOU_MIN,
            connectivity: Connectivity::Eight,
        }
    }
}

/// Best IoU of the inferred box against any ground-truth box; `None` when no
/// box could be inferred.
pub fn best_iou(sample: &BoxSample, params: &BoxParams) -> Option<f64> {
    let pred = infer_box(&sample.map, params.box_threshold, params.connectivity)?;
    Some(
        sample
            .gt_boxes
            .iter()
            .map(|g| box_iou(&pred, g))
            .fold(0.0, f64::max),
    )
}

pub fn localization_accuracy(samples: &[BoxSample], mode: AccuracyMode, params: &BoxParams) -> Result<f64> {
    check_box_threshold(params.box_threshold)?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for s in samples {
        let label_ok = match mode {
            AccuracyMode::GtKnown => true,
            AccuracyMode::Top1 => {
                let pred = s.pred_label.ok_or_else(|| Error::MissingPrediction { id: s.id.clone() })?;
                pred == s.gt_label
            }
        };
        if label_ok && best_iou(s, params).is_some_and(|iou| iou >= params.iou_min) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub box_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top1_acc: Option<f64>,
    pub gtknown_acc: f64,
}

/// Accuracy at each box threshold. Top-1 is reported only when every sample
/// carries a predicted label.
pub fn accuracy_sweep(samples: &[BoxSample], thresholds: &[f64], params: &BoxParams) -> Result<Vec<SweepPoint>> {
    let has_labels = samples.iter().all(|s| s.pred_label.is_some());
    thresholds
        .iter()
        .map(|&t| {
            let p = BoxParams { box_threshold: t, ..*params };
            Ok(SweepPoint {
                box_threshold: t,
                top1_acc: if has_labels {
                    Some(localization_accuracy(samples, AccuracyMode::Top1, &p)?)
                } else {
                    None
                },
                gtknown_acc: localization_accuracy(samples, AccuracyMode::GtKnown, &p)?,
            })
        })
        .collect()
}

/// Sweep grid `0.05, 0.10, ..., 0.95`.
pub fn default_sweep_thresholds() -> Vec<f64> {
    (1..20).map(|i| i as f64 * 0.05).collect()
}
