//! Direct evaluation of localization maps against pixel masks.
//!
//! Maps are quantized to `0..=255` and binarized at every integer threshold
//! with the predicate `value >= t`. Per threshold we report mean IoU,
//! dataset-level precision and recall, the peak of the IoU curve and the
//! average precision.

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid, QuantizedMap};

pub const LEVELS: usize = 256;

pub fn binarize(map: &QuantizedMap, t: u8) -> BinaryMask {
    BinaryMask(map.grid().map(|&v| v >= t))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    /// `tp / (tp + fp + fn)`, or 0 when nothing is predicted or labelled.
    pub fn iou(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp + self.fn_)
    }

    /// 0 when nothing is predicted.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// 0 when there is no foreground in the ground truth.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion_counts(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    pred.grid().check_same_dims(gt.grid())?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Confusion counts of one image at all 256 thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCounts(pub Vec<ConfusionCounts>);

impl ThresholdCounts {
    pub fn at(&self, t: u8) -> ConfusionCounts {
        self.0[t as usize]
    }

    pub fn iou_curve(&self) -> [f64; LEVELS] {
        std::array::from_fn(|t| self.0[t].iou())
    }
}

/// Counts at every threshold from two value histograms, in one pass over the
/// pixels.
pub fn threshold_counts(map: &QuantizedMap, gt: &BinaryMask) -> Result<ThresholdCounts> {
    map.grid().check_same_dims(gt.grid())?;
    let mut hist_fg = [0u64; LEVELS];
    let mut hist_bg = [0u64; LEVELS];
    for (&v, &g) in map.values().iter().zip(gt.values()) {
        if g {
            hist_fg[v as usize] += 1;
        } else {
            hist_bg[v as usize] += 1;
        }
    }
    let total_fg: u64 = hist_fg.iter().sum();
    let total_bg: u64 = hist_bg.iter().sum();
    let mut counts = vec![ConfusionCounts::default(); LEVELS];
    let (mut tp, mut fp) = (0u64, 0u64);
    for t in (0..LEVELS).rev() {
        tp += hist_fg[t];
        fp += hist_bg[t];
        counts[t] = ConfusionCounts {
            tp,
            fp,
            fn_: total_fg - tp,
            tn: total_bg - fp,
        };
    }
    Ok(ThresholdCounts(counts))
}

/// Per-image IoU at thresholds `0..=255`.
pub fn iou_threshold_curve(map: &QuantizedMap, gt: &BinaryMask) -> Result<[f64; LEVELS]> {
    Ok(threshold_counts(map, gt)?.iou_curve())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Averaging {
    /// Mean of per-image IoU.
    #[default]
    Macro,
    /// IoU of dataset-summed counts.
    Micro,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub mean_iou: [f64; LEVELS],
    pub precision: [f64; LEVELS],
    pub recall: [f64; LEVELS],
    pub peak_iou: f64,
    pub peak_t: u8,
    pub ap: f64,
}

impl EvalCurve {
    pub fn thresholds() -> impl Iterator<Item = u8> {
        0..=255u8
    }
}

/// Largest value and the smallest index attaining it.
pub fn peak(curve: &[f64; LEVELS]) -> (f64, u8) {
    let mut best = (curve[0], 0u8);
    for (t, &v) in curve.iter().enumerate().skip(1) {
        if v > best.0 {
            best = (v, t as u8);
        }
    }
    best
}

/// Step integration `sum_t (R_t - R_{t+1}) * P_t` with `R_256 = 0`.
pub fn average_precision(precision: &[f64; LEVELS], recall: &[f64; LEVELS]) -> f64 {
    let mut ap = 0.0;
    for t in 0..LEVELS {
        let next = if t + 1 < LEVELS { recall[t + 1] } else { 0.0 };
        ap += (recall[t] - next) * precision[t];
    }
    ap.clamp(0.0, 1.0)
}

/// Reduce per-image counts to a dataset curve. Reduction runs in input order
/// so the result is bit-identical however the counts were produced.
pub fn dataset_curve(images: &[ThresholdCounts], averaging: Averaging) -> Result<EvalCurve> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut micro = [ConfusionCounts::default(); LEVELS];
    let mut iou_sum = [0.0f64; LEVELS];
    for img in images {
        for t in 0..LEVELS {
            micro[t] += img.0[t];
            iou_sum[t] += img.0[t].iou();
        }
    }
    let n = images.len() as f64;
    let mean_iou: [f64; LEVELS] = match averaging {
        Averaging::Macro => std::array::from_fn(|t| iou_sum[t] / n),
        Averaging::Micro => std::array::from_fn(|t| micro[t].iou()),
    };
    let precision = std::array::from_fn(|t| micro[t].precision());
    let recall = std::array::from_fn(|t| micro[t].recall());
    let (peak_iou, peak_t) = peak(&mean_iou);
    let ap = average_precision(&precision, &recall);
    Ok(EvalCurve {
        mean_iou,
        precision,
        recall,
        peak_iou,
        peak_t,
        ap,
    })
}

/// Convenience: counts from `(map, mask)` pairs, then [`dataset_curve`].
pub fn curve_from_maps(pairs: &[(QuantizedMap, BinaryMask)], averaging: Averaging) -> Result<EvalCurve> {
    let counts = pairs
        .iter()
        .map(|(m, g)| threshold_counts(m, g))
        .collect::<Result<Vec<_>>>()?;
    dataset_curve(&counts, averaging)
}

pub fn quantized_from_rows(rows: &[Vec<u8>]) -> Result<QuantizedMap> {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    Ok(QuantizedMap(Grid::from_vec(h, w, rows.concat())?))
}
