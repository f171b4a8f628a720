//! Edge-map benchmarking: orientation-aware thinning, tolerance matching of
//! predicted to ground-truth edge pixels, and ODS / OIS / AP.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::grid::{BinaryMask, Grid};

pub const DEFAULT_TOLERANCE: f64 = 0.0075;
pub const DEFAULT_THRESHOLDS: usize = 99;

/// Relative difference below which two scores count as level.
const TIE_BAND: f64 = 1e-9;

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_BAND * a.abs().max(b.abs())
}

fn central_dx(g: &Grid<f64>) -> Grid<f64> {
    let (h, w) = g.dims();
    Grid::from_fn(h, w, |r, c| {
        let (r, c) = (r as isize, c as isize);
        (g.get_clamped(r, c + 1) - g.get_clamped(r, c - 1)) / 2.0
    })
}

fn central_dy(g: &Grid<f64>) -> Grid<f64> {
    let (h, w) = g.dims();
    Grid::from_fn(h, w, |r, c| {
        let (r, c) = (r as isize, c as isize);
        (g.get_clamped(r + 1, c) - g.get_clamped(r - 1, c)) / 2.0
    })
}

/// Bilinear sample at fractional `(row, col)`, clamped to the grid.
fn sample(g: &Grid<f64>, row: f64, col: f64) -> f64 {
    let row = row.clamp(0.0, (g.height() - 1) as f64);
    let col = col.clamp(0.0, (g.width() - 1) as f64);
    let (r0, c0) = (row.floor() as isize, col.floor() as isize);
    let (fr, fc) = (row - r0 as f64, col - c0 as f64);
    let top = g.get_clamped(r0, c0) * (1.0 - fc) + g.get_clamped(r0, c0 + 1) * fc;
    let bottom = g.get_clamped(r0 + 1, c0) * (1.0 - fc) + g.get_clamped(r0 + 1, c0 + 1) * fc;
    top * (1.0 - fr) + bottom * fr
}

/// Edge orientation in `[0, pi)` from second derivatives of the smoothed
/// map; the returned angle is that of the edge normal.
fn orientation(smooth: &Grid<f64>) -> Grid<f64> {
    let ox = central_dx(smooth);
    let oy = central_dy(smooth);
    let oxx = central_dx(&ox);
    let oxy = central_dx(&oy);
    let oyy = central_dy(&oy);
    let (h, w) = smooth.dims();
    Grid::from_fn(h, w, |r, c| {
        let sign = if -oxy.get(r, c) < 0.0 { -1.0 } else { 1.0 };
        let o = (oyy.get(r, c) * sign / (oxx.get(r, c) + 1e-5)).atan();
        o.rem_euclid(std::f64::consts::PI)
    })
}

/// Zero every pixel that is not maximal across its edge; survivors keep
/// their score.
pub fn nms_thin(edge_map: &Grid<f64>) -> Grid<f64> {
    let smooth = gaussian_blur(edge_map, 1.0);
    let theta = orientation(&smooth);
    let (h, w) = edge_map.dims();
    let data: Vec<f64> = (0..h * w)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / w, i % w);
            let e = edge_map.get(r, c);
            if e <= 0.0 {
                return 0.0;
            }
            let s = smooth.get(r, c);
            let (dr, dc) = (theta.get(r, c).sin(), theta.get(r, c).cos());
            for d in [1.0, -1.0] {
                let (nr, nc) = (r as f64 + d * dr, c as f64 + d * dc);
                let en = sample(edge_map, nr, nc);
                if !ties(en, e) {
                    if en > e {
                        return 0.0;
                    }
                    continue;
                }
                // flat ridge: the smoothed map points at the centre line
                let sn = sample(&smooth, nr, nc);
                if !ties(sn, s) {
                    if sn > s {
                        return 0.0;
                    }
                    continue;
                }
                // still level: keep the pixel on the negative side only
                if d > 0.0 {
                    return 0.0;
                }
            }
            e
        })
        .collect();
    Grid::from_vec(h, w, data).expect("same dimensions")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatchCounts {
    pub matched_pred: u64,
    pub total_pred: u64,
    pub matched_gt: u64,
    pub total_gt: u64,
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.matched_pred, self.total_pred)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.matched_gt, self.total_gt)
    }

    pub fn f_measure(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, o: Self) {
        self.matched_pred += o.matched_pred;
        self.total_pred += o.total_pred;
        self.matched_gt += o.matched_gt;
        self.total_gt += o.total_gt;
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Match radius in pixels: a fraction of the image diagonal.
pub fn match_radius(height: usize, width: usize, tol_frac: f64) -> f64 {
    tol_frac * ((height * height + width * width) as f64).sqrt()
}

/// Greedy one-to-one matching, nearest pairs first; equal distances go to
/// the row-major earlier prediction, then the earlier ground-truth pixel.
pub fn match_edges(pred: &BinaryMask, gt: &BinaryMask, tol_frac: f64) -> Result<MatchCounts> {
    pred.grid().check_same_dims(gt.grid())?;
    let (h, w) = pred.dims();
    let radius = match_radius(h, w, tol_frac);
    let reach = radius.floor() as isize;
    let r2 = radius * radius;
    let mut pairs: Vec<(i64, usize, usize)> = Vec::new();
    for (pi, _) in pred.values().iter().enumerate().filter(|(_, &v)| v) {
        let (pr, pc) = ((pi / w) as isize, (pi % w) as isize);
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let d2 = dr * dr + dc * dc;
                let (gr, gc) = (pr + dr, pc + dc);
                if d2 as f64 > r2 || gr < 0 || gc < 0 || gr >= h as isize || gc >= w as isize {
                    continue;
                }
                if gt.get(gr as usize, gc as usize) {
                    pairs.push((d2 as i64, pi, gr as usize * w + gc as usize));
                }
            }
        }
    }
    pairs.sort_unstable();
    let mut pred_used = vec![false; h * w];
    let mut gt_used = vec![false; h * w];
    let mut matched = 0u64;
    for (_, p, g) in pairs {
        if !pred_used[p] && !gt_used[g] {
            pred_used[p] = true;
            gt_used[g] = true;
            matched += 1;
        }
    }
    Ok(MatchCounts {
        matched_pred: matched,
        total_pred: pred.count() as u64,
        matched_gt: matched,
        total_gt: gt.count() as u64,
    })
}

/// `i / (n + 1)` for `i = 1..=n`.
pub fn default_thresholds(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeBenchResult {
    pub ods: f64,
    pub ods_threshold: f64,
    pub ois: f64,
    pub ap: f64,
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f: Vec<f64>,
}

/// One image: a score map in `[0, 1]` and its ground-truth edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePair {
    pub pred: Grid<f64>,
    pub gt: BinaryMask,
}

/// Per-image counts at every threshold, after thinning.
pub fn image_counts(pair: &EdgePair, thresholds: &[f64], tol_frac: f64) -> Result<Vec<MatchCounts>> {
    pair.pred.check_same_dims(pair.gt.grid())?;
    let thin = nms_thin(&pair.pred);
    thresholds
        .iter()
        .map(|&t| match_edges(&BinaryMask(thin.map(|&v| v > 0.0 && v >= t)), &pair.gt, tol_frac))
        .collect()
}

pub fn edge_benchmark(pairs: &[EdgePair], thresholds: &[f64], tol_frac: f64) -> Result<EdgeBenchResult> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("empty threshold list".into()));
    }
    if let Some(v) = pairs
        .iter()
        .flat_map(|p| p.pred.as_slice())
        .find(|v| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::InvalidInput(format!("edge score {v} outside [0, 1]")));
    }
    let per_image = pairs
        .par_iter()
        .map(|p| image_counts(p, thresholds, tol_frac))
        .collect::<Result<Vec<_>>>()?;
    benchmark_from_counts(&per_image, thresholds)
}

/// Reduce per-image counts (images × thresholds) to the dataset summary.
pub fn benchmark_from_counts(per_image: &[Vec<MatchCounts>], thresholds: &[f64]) -> Result<EdgeBenchResult> {
    if per_image.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_t = thresholds.len();
    let mut total = vec![MatchCounts::default(); n_t];
    for img in per_image {
        for (acc, c) in total.iter_mut().zip(img) {
            *acc += *c;
        }
    }
    let precision: Vec<f64> = total.iter().map(MatchCounts::precision).collect();
    let recall: Vec<f64> = total.iter().map(MatchCounts::recall).collect();
    let f: Vec<f64> = total.iter().map(MatchCounts::f_measure).collect();
    let mut best = 0;
    for i in 1..n_t {
        if f[i] > f[best] {
            best = i;
        }
    }
    let ois = per_image
        .iter()
        .map(|img| img.iter().map(MatchCounts::f_measure).fold(0.0, f64::max))
        .sum::<f64>()
        / per_image.len() as f64;
    let mut ap = 0.0;
    for i in 0..n_t {
        let next = if i + 1 < n_t { recall[i + 1] } else { 0.0 };
        ap += (recall[i] - next) * precision[i];
    }
    Ok(EdgeBenchResult {
        ods: f[best],
        ods_threshold: thresholds[best],
        ois,
        ap: ap.clamp(0.0, 1.0),
        thresholds: thresholds.to_vec(),
        precision,
        recall,
        f,
    })
}
