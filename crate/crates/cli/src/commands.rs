//! Subcommand bodies. Each reads its inputs, calls into the library and
//! writes its outputs; nothing here touches the numerics.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use locmap_core::boundary::{make_pseudo_boundary, CannyParams, CrfParams};
use locmap_core::box_eval::{
    accuracy_sweep, check_box_threshold, default_sweep_thresholds, localization_accuracy, AccuracyMode,
    BoxParams, Connectivity, SweepPoint,
};
use locmap_core::direct_eval::Averaging;
use locmap_core::edge_eval::{default_thresholds, edge_benchmark, EdgeBenchResult, EdgePair};
use locmap_core::fixtures::{gen_fixtures, FixtureParams};
use locmap_core::grid::{BinaryMask, Grid};
use locmap_core::hns::{toy_fit_images, FitConfig, FitImage, LossMode};
use locmap_core::io::png::{read_gray_png, write_gray_png};
use locmap_core::io::report::read_report;
use locmap_core::io::{
    load_manifest, read_mask_png, write_array, write_json, write_manifest, ImageRecord, Manifest, NpyArray,
    ReportBundle,
};
use locmap_core::pipeline::{self, MapSource};
use locmap_core::plot::{iou_threshold_plot, pr_plot, report_pr_plot};
use locmap_core::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::{
    AveragingArg, EnhanceArgs, EvalBoxesArgs, EvalEdgesArgs, EvalMapsArgs, FitEdgesArgs, FixturesArgs,
    GenEdgesArgs, ModeArg, ReportArgs, Source, SweepKArgs,
};

fn source(s: Source, k: usize) -> MapSource {
    match s {
        Source::Cam => MapSource::Cam,
        Source::Sem => MapSource::Sem { k },
    }
}

fn averaging(a: AveragingArg) -> Averaging {
    match a {
        AveragingArg::Macro => Averaging::Macro,
        AveragingArg::Micro => Averaging::Micro,
    }
}

/// Write to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_out(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| Error::io(path, e))
}

/// `relative` (resolved against the source manifest) re-expressed relative
/// to `new_base`.
fn rebase(manifest: &Manifest, relative: &str, new_base: &Path) -> Result<String> {
    let target = absolute(&manifest.resolve(relative))?;
    let rel = pathdiff::diff_paths(&target, new_base).unwrap_or(target);
    Ok(rel.to_string_lossy().replace('\\', "/"))
}

fn rebase_record(manifest: &Manifest, rec: &ImageRecord, new_base: &Path) -> Result<ImageRecord> {
    let opt = |p: &Option<String>| p.as_deref().map(|p| rebase(manifest, p, new_base)).transpose();
    Ok(ImageRecord {
        id: rec.id.clone(),
        width: rec.width,
        height: rec.height,
        cam: rebase(manifest, &rec.cam, new_base)?,
        features: opt(&rec.features)?,
        gt_mask: rebase(manifest, &rec.gt_mask, new_base)?,
        gt_boxes: rec.gt_boxes.clone(),
        gt_label: rec.gt_label,
        pred_label: rec.pred_label,
        rgb: opt(&rec.rgb)?,
        edges: opt(&rec.edges)?,
    })
}

fn non_empty(manifest: &Manifest) -> Result<()> {
    if manifest.images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidK { k, max: usize::MAX });
    }
    Ok(())
}

pub fn enhance(a: &EnhanceArgs) -> Result<()> {
    check_k(a.k)?;
    let manifest = load_manifest(&a.manifest)?;
    non_empty(&manifest)?;
    create_dir(&a.out_dir)?;
    let base = absolute(&a.out_dir)?;
    let maps = manifest
        .images
        .par_iter()
        .map(|rec| pipeline::sem_for_record(&manifest, rec, a.k))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(maps.len());
    for (rec, map) in manifest.images.iter().zip(&maps) {
        let name = format!("{}_sem.npy", rec.id);
        write_array(a.out_dir.join(&name), &NpyArray::from_grid(map.grid()))?;
        let mut out = rebase_record(&manifest, rec, &base)?;
        out.cam = name;
        records.push(out);
    }
    write_manifest(
        a.out_dir.join("manifest.json"),
        &Manifest::new(manifest.num_classes, records, &a.out_dir),
    )
}

pub fn eval_maps(a: &EvalMapsArgs) -> Result<()> {
    check_k(a.k)?;
    let manifest = load_manifest(&a.manifest)?;
    let src = source(a.source, a.k);
    let curve = pipeline::eval_maps(&manifest, src, averaging(a.averaging))?;
    let mut config = json!({
        "subcommand": "eval-maps",
        "manifest": a.manifest.to_string_lossy(),
        "source": src.name(),
        "averaging": format!("{:?}", a.averaging).to_lowercase(),
    });
    if let MapSource::Sem { k } = src {
        config["k"] = json!(k);
    }
    let bundle = ReportBundle::from_curve(config, &curve);
    write_report_outputs(&a.out, &bundle)
}

fn write_report_outputs(out: &Path, bundle: &ReportBundle) -> Result<()> {
    write_json(out, bundle)?;
    write_text(&out.with_extension("csv"), &bundle.to_csv())?;
    let label = bundle.config.get("source").and_then(|v| v.as_str()).unwrap_or("map");
    write_text(&out.with_extension("svg"), &iou_threshold_plot(&[(label, bundle)]).to_svg())
}

#[derive(Serialize)]
struct BoxReport {
    config: serde_json::Value,
    gtknown_acc: f64,
    /// Absent when some record lacks a predicted label.
    #[serde(skip_serializing_if = "Option::is_none")]
    top1_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<Vec<SweepPoint>>,
}

pub fn eval_boxes(a: &EvalBoxesArgs) -> Result<()> {
    check_k(a.k)?;
    check_box_threshold(a.box_threshold)?;
    let connectivity = Connectivity::try_from(a.connectivity)?;
    let manifest = load_manifest(&a.manifest)?;
    non_empty(&manifest)?;
    let src = source(a.source, a.k);
    let samples = pipeline::box_samples(&manifest, src)?;
    let params = BoxParams {
        box_threshold: a.box_threshold,
        connectivity,
        ..BoxParams::default()
    };
    let top1_acc = if samples.iter().all(|s| s.pred_label.is_some()) {
        Some(localization_accuracy(&samples, AccuracyMode::Top1, &params)?)
    } else {
        None
    };
    let mut config = json!({
        "subcommand": "eval-boxes",
        "manifest": a.manifest.to_string_lossy(),
        "source": src.name(),
        "box_threshold": a.box_threshold,
        "connectivity": a.connectivity,
    });
    if let MapSource::Sem { k } = src {
        config["k"] = json!(k);
    }
    let report = BoxReport {
        config,
        gtknown_acc: localization_accuracy(&samples, AccuracyMode::GtKnown, &params)?,
        top1_acc,
        sweep: if a.sweep {
            Some(accuracy_sweep(&samples, &default_sweep_thresholds(), &params)?)
        } else {
            None
        },
    };
    emit_json(a.out.as_deref(), &report)
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => print_out(&to_json(value)?),
    }
}

pub fn gen_edges(a: &GenEdgesArgs) -> Result<()> {
    check_k(a.k)?;
    let manifest = load_manifest(&a.manifest)?;
    non_empty(&manifest)?;
    create_dir(&a.out_dir)?;
    let base = absolute(&a.out_dir)?;
    let crf = CrfParams::default();
    let canny = CannyParams::default();
    let boundaries = manifest
        .images
        .par_iter()
        .map(|rec| {
            let map = pipeline::load_map(&manifest, rec, MapSource::Sem { k: a.k })?;
            let rgb = pipeline::load_rgb(&manifest, rec)?;
            match make_pseudo_boundary(&map, &rgb, &crf, &canny) {
                Ok(b) => Ok(Some(b)),
                Err(Error::EmptyObject) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(boundaries.len());
    for (rec, boundary) in manifest.images.iter().zip(&boundaries) {
        let mut out = rebase_record(&manifest, rec, &base)?;
        match boundary {
            Some(b) => {
                let name = format!("{}_edges.png", rec.id);
                locmap_core::io::write_mask_png(a.out_dir.join(&name), b)?;
                out.edges = Some(name);
            }
            None => {
                eprintln!("warning: {}: refined map has no object, no pseudo-boundary written", rec.id);
                out.edges = None;
            }
        }
        records.push(out);
    }
    write_manifest(
        a.out_dir.join("manifest.json"),
        &Manifest::new(manifest.num_classes, records, &a.out_dir),
    )
}

pub fn fit_edges(a: &FitEdgesArgs) -> Result<()> {
    if !(a.lr.is_finite() && a.lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", a.lr)));
    }
    if !(a.lambda.is_finite() && a.lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {}", a.lambda)));
    }
    let manifest = load_manifest(&a.manifest)?;
    let data = manifest
        .images
        .par_iter()
        .filter(|rec| rec.edges.is_some())
        .map(|rec| {
            let edges = read_mask_png(manifest.resolve(rec.edges.as_deref().unwrap_or_default()))?;
            let (h, w) = edges.dims();
            let mut features = pipeline::load_features(&manifest, rec)?;
            if features.spatial_dims() != (h, w) {
                features = features.resize(h, w)?;
            }
            Ok((rec.id.clone(), features, edges))
        })
        .collect::<Result<Vec<_>>>()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("no manifest record has an edges map".into()));
    }
    let images: Vec<FitImage> = data
        .iter()
        .map(|(_, features, edges)| FitImage { features, edges, hard_negatives: None })
        .collect();
    let config = FitConfig {
        steps: a.steps,
        lr: a.lr,
        lambda: a.lambda,
        mode: match a.mode {
            ModeArg::Vanilla => LossMode::Vanilla,
            ModeArg::Hns => LossMode::Hns,
        },
    };
    let fit = toy_fit_images(&images, &config)?;
    let weights = fit.predictor.to_vec();
    write_array(
        &a.out,
        &NpyArray::f32(vec![1, weights.len()], weights.iter().map(|&v| v as f32).collect()),
    )?;
    if let Some(dir) = &a.pred_out {
        create_dir(dir)?;
        let preds = data
            .par_iter()
            .map(|(_, features, _)| fit.predictor.predict(features))
            .collect::<Result<Vec<_>>>()?;
        for ((id, _, _), pred) in data.iter().zip(preds) {
            let gray = pred.grid().map(|&p| (p * 255.0).round() as u8);
            write_gray_png(dir.join(format!("{id}.png")), &gray)?;
        }
    }
    print_out(&to_json(&fit.metrics)?)?;
    if let Some(path) = &a.metrics_out {
        write_json(path, &fit.metrics)?;
    }
    Ok(())
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

#[derive(Serialize)]
struct EdgeReport<'a> {
    config: serde_json::Value,
    images: usize,
    #[serde(flatten)]
    result: &'a EdgeBenchResult,
}

pub fn eval_edges(a: &EvalEdgesArgs) -> Result<()> {
    if !(a.tol.is_finite() && a.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", a.tol)));
    }
    let names = png_names(&a.pred_dir)?;
    if names.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pairs = names
        .par_iter()
        .map(|name| {
            let gt_path = a.gt_dir.join(name);
            if !gt_path.is_file() {
                return Err(Error::InvalidInput(format!(
                    "no ground truth for {name} in {}",
                    a.gt_dir.display()
                )));
            }
            let pred: Grid<f64> = read_gray_png(a.pred_dir.join(name))?.map(|&v| f64::from(v) / 255.0);
            let mut gt: BinaryMask = read_mask_png(&gt_path)?;
            if a.gt_from_masks {
                gt = gt.boundary4();
            }
            Ok(EdgePair { pred, gt })
        })
        .collect::<Result<Vec<_>>>()?;
    let result = edge_benchmark(&pairs, &default_thresholds(a.thresholds), a.tol)?;
    let report = EdgeReport {
        config: json!({
            "subcommand": "eval-edges",
            "pred_dir": a.pred_dir.to_string_lossy(),
            "gt_dir": a.gt_dir.to_string_lossy(),
            "tol": a.tol,
            "thresholds": a.thresholds,
            "gt_from_masks": a.gt_from_masks,
        }),
        images: pairs.len(),
        result: &result,
    };
    write_json(&a.out, &report)?;
    let plot = pr_plot(
        "Edge precision-recall",
        vec![("edges".into(), result.precision.clone(), result.recall.clone())],
    );
    write_text(&a.out.with_extension("svg"), &plot.to_svg())
}

pub fn fixtures(a: &FixturesArgs) -> Result<()> {
    let params = FixtureParams {
        height: a.size,
        width: a.size,
        channels: a.channels,
        ..FixtureParams::default()
    };
    let path = gen_fixtures(a.seed, &a.out_dir, a.n, &params)?;
    print_out(&format!("{}\n", path.display()))
}

pub fn sweep_k(a: &SweepKArgs) -> Result<()> {
    for &k in &a.ks {
        check_k(k)?;
    }
    check_box_threshold(a.box_threshold)?;
    let manifest = load_manifest(&a.manifest)?;
    let params = BoxParams {
        box_threshold: a.box_threshold,
        ..BoxParams::default()
    };
    let rows = pipeline::k_sweep(&manifest, &a.ks, &params, Averaging::Macro)?;
    let csv = pipeline::k_sweep_csv(&rows);
    match &a.out {
        Some(path) => write_text(path, &csv),
        None => print_out(&csv),
    }
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let bundles = a.inputs.iter().map(read_report).collect::<Result<Vec<_>>>()?;
    create_dir(&a.out_dir)?;
    let labels: Vec<String> = a
        .inputs
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    for (label, bundle) in labels.iter().zip(&bundles) {
        write_text(&a.out_dir.join(format!("{label}.csv")), &bundle.to_csv())?;
    }
    let named: Vec<(&str, &ReportBundle)> = labels.iter().map(String::as_str).zip(&bundles).collect();
    write_text(&a.out_dir.join("iou_threshold.svg"), &iou_threshold_plot(&named).to_svg())?;
    write_text(&a.out_dir.join("pr.svg"), &report_pr_plot(&named).to_svg())
}
