//! Manifest-level runs: load each record's map from the chosen source, bring
//! it to mask resolution, and feed the metrics.
//!
//! Records are processed in parallel on the current rayon pool; results are
//! collected in manifest order and reduced sequentially.

use rayon::prelude::*;
use serde::Serialize;

use crate::box_eval::{localization_accuracy, AccuracyMode, BoxParams, BoxSample};
use crate::direct_eval::{dataset_curve, threshold_counts, Averaging, EvalCurve};
use crate::error::{Error, Result};
use crate::grid::{normalize_map, quantize_map, resize_grid, BinaryMask, FeatureStack, Grid, RgbImage, ScoreMap};
use crate::io::manifest::{ImageRecord, Manifest};
use crate::io::npy::read_array;
use crate::io::png::{read_mask_png, read_rgb_png};
use crate::sem::sem_enhance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapSource {
    /// The first-stage map as stored.
    Cam,
    /// Self-enhanced with `k` seeds.
    Sem { k: usize },
}

impl MapSource {
    pub fn name(&self) -> &'static str {
        match self {
            MapSource::Cam => "cam",
            MapSource::Sem { .. } => "sem",
        }
    }
}

pub fn load_cam(manifest: &Manifest, record: &ImageRecord) -> Result<Grid<f64>> {
    read_array(manifest.resolve(&record.cam))?.to_grid()
}

pub fn load_features(manifest: &Manifest, record: &ImageRecord) -> Result<FeatureStack> {
    let rel = record
        .features
        .as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("record {} has no features", record.id)))?;
    read_array(manifest.resolve(rel))?.to_feature_stack()
}

pub fn load_rgb(manifest: &Manifest, record: &ImageRecord) -> Result<RgbImage> {
    let rel = record
        .rgb
        .as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("record {} has no rgb image", record.id)))?;
    let rgb = read_rgb_png(manifest.resolve(rel))?;
    check_record_dims(record, rgb.dims())?;
    Ok(rgb)
}

pub fn load_mask(manifest: &Manifest, record: &ImageRecord) -> Result<BinaryMask> {
    let mask = read_mask_png(manifest.resolve(&record.gt_mask))?;
    check_record_dims(record, mask.dims())?;
    Ok(mask)
}

fn check_record_dims(record: &ImageRecord, found: (usize, usize)) -> Result<()> {
    let expected = (record.height, record.width);
    if found != expected {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

/// SEM at feature resolution. The first-stage map is resized to the feature
/// grid if needed.
pub fn sem_for_record(manifest: &Manifest, record: &ImageRecord, k: usize) -> Result<ScoreMap> {
    let features = load_features(manifest, record)?;
    let (fh, fw) = features.spatial_dims();
    let cam = normalize_map(&resize_grid(&load_cam(manifest, record)?, fh, fw)?)?;
    sem_enhance(&features, &cam, k)
}

/// The record's map from `source`, at mask resolution, normalized to [0, 1].
pub fn load_map(manifest: &Manifest, record: &ImageRecord, source: MapSource) -> Result<ScoreMap> {
    let raw = match source {
        MapSource::Cam => load_cam(manifest, record)?,
        MapSource::Sem { k } => sem_for_record(manifest, record, k)?.into_grid(),
    };
    normalize_map(&resize_grid(&raw, record.height, record.width)?)
}

/// Maps and masks for every record, in manifest order.
pub fn load_pairs(manifest: &Manifest, source: MapSource) -> Result<Vec<(ScoreMap, BinaryMask)>> {
    manifest
        .images
        .par_iter()
        .map(|rec| Ok((load_map(manifest, rec, source)?, load_mask(manifest, rec)?)))
        .collect()
}

pub fn curve_from_pairs(pairs: &[(ScoreMap, BinaryMask)], averaging: Averaging) -> Result<EvalCurve> {
    let counts = pairs
        .par_iter()
        .map(|(map, mask)| threshold_counts(&quantize_map(map), mask))
        .collect::<Result<Vec<_>>>()?;
    dataset_curve(&counts, averaging)
}

pub fn eval_maps(manifest: &Manifest, source: MapSource, averaging: Averaging) -> Result<EvalCurve> {
    if manifest.images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    curve_from_pairs(&load_pairs(manifest, source)?, averaging)
}

pub fn box_samples_from(manifest: &Manifest, maps: Vec<ScoreMap>) -> Vec<BoxSample> {
    manifest
        .images
        .iter()
        .zip(maps)
        .map(|(rec, map)| BoxSample {
            id: rec.id.clone(),
            map,
            gt_boxes: rec.gt_boxes.clone(),
            gt_label: rec.gt_label,
            pred_label: rec.pred_label,
        })
        .collect()
}

pub fn box_samples(manifest: &Manifest, source: MapSource) -> Result<Vec<BoxSample>> {
    let maps = manifest
        .images
        .par_iter()
        .map(|rec| load_map(manifest, rec, source))
        .collect::<Result<Vec<_>>>()?;
    Ok(box_samples_from(manifest, maps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KSweepRow {
    pub k: usize,
    pub gtknown_acc: f64,
    pub peak_iou: f64,
}

/// SEM with each `k`, scored by Gt-known box accuracy and direct Peak-IoU.
pub fn k_sweep(manifest: &Manifest, ks: &[usize], params: &BoxParams, averaging: Averaging) -> Result<Vec<KSweepRow>> {
    if ks.is_empty() {
        return Err(Error::InvalidArgument("empty K list".into()));
    }
    if manifest.images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ks.iter()
        .map(|&k| {
            let pairs = load_pairs(manifest, MapSource::Sem { k })?;
            let curve = curve_from_pairs(&pairs, averaging)?;
            let samples = box_samples_from(manifest, pairs.into_iter().map(|(m, _)| m).collect());
            Ok(KSweepRow {
                k,
                gtknown_acc: localization_accuracy(&samples, AccuracyMode::GtKnown, params)?,
                peak_iou: curve.peak_iou,
            })
        })
        .collect()
}

pub fn k_sweep_csv(rows: &[KSweepRow]) -> String {
    let mut out = String::from("K,gtknown_acc,peak_iou\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.k, r.gtknown_acc, r.peak_iou));
    }
    out
}
