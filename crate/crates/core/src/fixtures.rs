//! Seeded synthetic datasets.
//!
//! Localization fixtures: one object (rectangle or ellipse) per image, a
//! feature stack where object and background pixels point along two
//! well-separated directions, and a first-stage map that only lights up an
//! off-centre part of the object. Object boundaries are softened by a small
//! blur in both the features and the RGB render.
//!
//! Each image draws from its own ChaCha8 stream seeded with `seed + index`,
//! so outputs are identical however they are scheduled.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::box_eval::{connected_components, BBox, Connectivity};
use crate::edge_eval::EdgePair;
use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::grid::{BinaryMask, FeatureStack, Grid, RgbImage};
use crate::io::manifest::{write_manifest, ImageRecord, Manifest};
use crate::io::npy::{write_array, NpyArray};
use crate::io::png::{write_mask_png, write_rgb_png};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureParams {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub num_classes: usize,
    /// Standard deviation of the per-channel feature noise.
    pub feature_noise: f64,
    /// Blur applied to the object indicator before rendering.
    pub boundary_blur: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            height: 80,
            width: 80,
            channels: 8,
            num_classes: 5,
            feature_noise: 0.05,
            boundary_blur: 1.2,
        }
    }
}

impl FixtureParams {
    pub const MIN_SIZE: usize = 24;

    pub fn validate(&self) -> Result<()> {
        if self.height < Self::MIN_SIZE || self.width < Self::MIN_SIZE {
            return Err(Error::InvalidArgument(format!(
                "fixture size {}x{} is below the minimum {}",
                self.height,
                self.width,
                Self::MIN_SIZE
            )));
        }
        if self.channels < 2 {
            return Err(Error::InvalidArgument("fixtures need at least 2 feature channels".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidArgument("fixtures need at least 1 class".into()));
        }
        for (name, v) in [("feature noise", self.feature_noise), ("boundary blur", self.boundary_blur)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect { r0: usize, c0: usize, r1: usize, c1: usize },
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64 },
}

impl Shape {
    fn contains(&self, r: usize, c: usize) -> bool {
        match *self {
            Shape::Rect { r0, c0, r1, c1 } => (r0..=r1).contains(&r) && (c0..=c1).contains(&c),
            Shape::Ellipse { cy, cx, ry, rx } => {
                let (dy, dx) = ((r as f64 - cy) / ry, (c as f64 - cx) / rx);
                dy * dy + dx * dx <= 1.0
            }
        }
    }

    /// A point inside the object, roughly halfway from the centre to the
    /// boundary in a random direction.
    fn off_centre(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match *self {
            Shape::Rect { r0, c0, r1, c1 } => {
                let frac = |rng: &mut ChaCha8Rng| {
                    let f = rng.random_range(0.25..0.35);
                    if rng.random_bool(0.5) {
                        f
                    } else {
                        1.0 - f
                    }
                };
                let fy = frac(rng);
                let fx = frac(rng);
                (r0 as f64 + fy * (r1 - r0) as f64, c0 as f64 + fx * (c1 - c0) as f64)
            }
            Shape::Ellipse { cy, cx, ry, rx } => {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let f = rng.random_range(0.5..0.6);
                (cy + f * ry * a.sin(), cx + f * rx * a.cos())
            }
        }
    }

    /// Smallest half-extent.
    fn half_size(&self) -> f64 {
        match *self {
            Shape::Rect { r0, c0, r1, c1 } => ((r1 - r0) as f64).min((c1 - c0) as f64) / 2.0,
            Shape::Ellipse { ry, rx, .. } => ry.min(rx),
        }
    }
}

fn random_shape(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Shape {
    let margin = 6usize;
    let min_side = (h.min(w) * 3 / 10).max(8);
    let max_side = (h.min(w) * 6 / 10).max(min_side + 1);
    let sh = rng.random_range(min_side..max_side);
    let sw = rng.random_range(min_side..max_side);
    let r0 = rng.random_range(margin..(h - margin - sh).max(margin + 1));
    let c0 = rng.random_range(margin..(w - margin - sw).max(margin + 1));
    if rng.random_bool(0.5) {
        Shape::Rect { r0, c0, r1: r0 + sh - 1, c1: c0 + sw - 1 }
    } else {
        Shape::Ellipse {
            cy: r0 as f64 + (sh - 1) as f64 / 2.0,
            cx: c0 as f64 + (sw - 1) as f64 / 2.0,
            ry: sh as f64 / 2.0,
            rx: sw as f64 / 2.0,
        }
    }
}

/// Object and background feature directions: unit vectors with cosine
/// [`BACKGROUND_COSINE`].
fn direction_pair(rng: &mut ChaCha8Rng, channels: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = orthonormal_pair(rng, channels);
    let s = (1.0 - BACKGROUND_COSINE * BACKGROUND_COSINE).sqrt();
    let bg = a.iter().zip(&b).map(|(x, y)| BACKGROUND_COSINE * x + s * y).collect();
    (a, bg)
}

/// Background features lean away from the object, so similarity to object
/// seeds drops well below zero off the object.
const BACKGROUND_COSINE: f64 = -0.5;

/// Two orthonormal directions in `channels` dimensions.
fn orthonormal_pair(rng: &mut ChaCha8Rng, channels: usize) -> (Vec<f64>, Vec<f64>) {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let a = unit((0..channels).map(|_| normal.sample(rng)).collect());
    let raw: Vec<f64> = (0..channels).map(|_| normal.sample(rng)).collect();
    let dot: f64 = raw.iter().zip(&a).map(|(x, y)| x * y).sum();
    let b = unit(raw.iter().zip(&a).map(|(x, y)| x - dot * y).collect());
    (a, b)
}

/// One generated image, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub id: String,
    pub mask: BinaryMask,
    pub gt_box: BBox,
    pub features: FeatureStack,
    /// Raw first-stage map (not normalized).
    pub cam: Grid<f64>,
    pub rgb: RgbImage,
    pub gt_label: usize,
    pub pred_label: usize,
}

pub fn tight_box(mask: &BinaryMask) -> Option<BBox> {
    let labeling = connected_components(mask, Connectivity::Eight);
    let (h, w) = mask.dims();
    let mut b: Option<BBox> = None;
    for r in 0..h {
        for c in 0..w {
            if labeling.labels.get(r, c) == 0 {
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

pub fn make_fixture(seed: u64, index: usize, params: &FixtureParams) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    let (h, w) = (params.height, params.width);
    let shape = random_shape(&mut rng, h, w);
    let mask = BinaryMask(Grid::from_fn(h, w, |r, c| shape.contains(r, c)));
    let soft = gaussian_blur(&mask.grid().map(|&b| if b { 1.0 } else { 0.0 }), params.boundary_blur);

    let (d_obj, d_bg) = direction_pair(&mut rng, params.channels);
    let noise = Normal::new(0.0, params.feature_noise).expect("valid noise");
    let mut data = vec![0.0; params.channels * h * w];
    for r in 0..h {
        for c in 0..w {
            let m = soft.get(r, c);
            for ch in 0..params.channels {
                data[(ch * h + r) * w + c] = m * d_obj[ch] + (1.0 - m) * d_bg[ch] + noise.sample(&mut rng);
            }
        }
    }
    let features = FeatureStack::new(params.channels, h, w, data).expect("finite features");

    // first stage: a narrow bump on one part of the object, low noise elsewhere
    let (by, bx) = shape.off_centre(&mut rng);
    let spread = shape.half_size() * rng.random_range(0.35..0.5);
    let scale = rng.random_range(2.0..6.0);
    let offset = rng.random_range(-1.0..1.0);
    let cam = Grid::from_fn(h, w, |r, c| {
        let d2 = (r as f64 - by).powi(2) + (c as f64 - bx).powi(2);
        let bump = (-d2 / (2.0 * spread * spread)).exp();
        offset + scale * (bump + 0.02 * rng.random::<f64>())
    });

    let luma = |c: [u8; 3]| 0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64;
    let (obj_color, bg_color) = loop {
        let a: [u8; 3] = [rng.random(), rng.random(), rng.random()];
        let b: [u8; 3] = [rng.random(), rng.random(), rng.random()];
        if (luma(a) - luma(b)).abs() >= 80.0 {
            break (a, b);
        }
    };
    let pixel_noise = Normal::new(0.0, 3.0).expect("valid noise");
    let rgb = RgbImage(Grid::from_fn(h, w, |r, c| {
        let m = soft.get(r, c);
        std::array::from_fn(|i| {
            let v = m * obj_color[i] as f64 + (1.0 - m) * bg_color[i] as f64 + pixel_noise.sample(&mut rng);
            v.round().clamp(0.0, 255.0) as u8
        })
    }));

    let gt_label = rng.random_range(0..params.num_classes);
    let pred_label = if rng.random_bool(0.8) || params.num_classes == 1 {
        gt_label
    } else {
        (gt_label + rng.random_range(1..params.num_classes)) % params.num_classes
    };
    Fixture {
        id: format!("img{index:03}"),
        gt_box: tight_box(&mask).expect("object is non-empty"),
        mask,
        features,
        cam,
        rgb,
        gt_label,
        pred_label,
    }
}

/// Write `n` fixtures plus `manifest.json` into `out_dir`; returns the
/// manifest path.
pub fn gen_fixtures(seed: u64, out_dir: &Path, n: usize, params: &FixtureParams) -> Result<PathBuf> {
    if n == 0 {
        return Err(Error::InvalidArgument("fixture count must be at least 1".into()));
    }
    params.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let f = make_fixture(seed, i, params);
        let name = |suffix: &str| format!("{}_{suffix}", f.id);
        write_array(out_dir.join(name("cam.npy")), &NpyArray::from_grid(&f.cam))?;
        write_array(out_dir.join(name("feat.npy")), &NpyArray::from_feature_stack(&f.features))?;
        write_mask_png(out_dir.join(name("mask.png")), &f.mask)?;
        write_rgb_png(out_dir.join(name("rgb.png")), &f.rgb)?;
        records.push(ImageRecord {
            id: f.id.clone(),
            width: params.width,
            height: params.height,
            cam: name("cam.npy"),
            features: Some(name("feat.npy")),
            gt_mask: name("mask.png"),
            gt_boxes: vec![f.gt_box],
            gt_label: f.gt_label,
            pred_label: Some(f.pred_label),
            rgb: Some(name("rgb.png")),
            edges: None,
        });
    }
    let path = out_dir.join("manifest.json");
    write_manifest(&path, &Manifest::new(params.num_classes, records, out_dir))?;
    Ok(path)
}

/// Training data for the boundary fitter: thin rectangle outlines as edges,
/// and optionally a fraction of background pixels ("clutter") whose
/// features look partly edge-like.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterFixture {
    pub features: FeatureStack,
    pub edges: BinaryMask,
    pub clutter: BinaryMask,
}

pub fn clutter_fixture(seed: u64, size: usize, clutter_frac: f64) -> ClutterFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BinaryMask::empty(size, size);
    for _ in 0..3 {
        let r0 = rng.random_range(2..size / 2);
        let c0 = rng.random_range(2..size / 2);
        let r1 = rng.random_range(r0 + 6..size - 2);
        let c1 = rng.random_range(c0 + 6..size - 2);
        for r in r0..=r1 {
            for c in c0..=c1 {
                if r == r0 || r == r1 || c == c0 || c == c1 {
                    edges.set(r, c, true);
                }
            }
        }
    }
    let clutter = BinaryMask(Grid::from_fn(size, size, |r, c| {
        !edges.get(r, c) && rng.random_bool(clutter_frac)
    }));
    let noise = Normal::new(0.0, 0.05).expect("valid noise");
    let texture = Normal::new(0.0, 0.3).expect("valid noise");
    let features = FeatureStack::from_fn(4, size, size, |ch, r, c| {
        let strength = if edges.get(r, c) {
            1.0
        } else if clutter.get(r, c) {
            0.55
        } else {
            0.0
        };
        match ch {
            0 => strength + noise.sample(&mut rng),
            _ => texture.sample(&mut rng),
        }
    })
    .expect("finite features");
    ClutterFixture { features, edges, clutter }
}

/// A random edge-benchmark dataset: object outlines as ground truth and
/// blurred, noisy, partly spurious score maps as predictions.
pub fn edge_dataset(seed: u64, n: usize, size: usize) -> Vec<EdgePair> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let shape = random_shape(&mut rng, size, size);
            let mask = BinaryMask(Grid::from_fn(size, size, |r, c| shape.contains(r, c)));
            let gt = mask.boundary4();
            let strength = rng.random_range(0.5..1.0);
            let mut raw = gt.grid().map(|&b| if b { strength } else { 0.0 });
            // spurious responses
            for _ in 0..rng.random_range(0..4) {
                let r = rng.random_range(0..size);
                let c0 = rng.random_range(0..size / 2);
                let len = rng.random_range(4..size / 2);
                let s = rng.random_range(0.2..0.9);
                for c in c0..(c0 + len).min(size) {
                    raw.set(r, c, s);
                }
            }
            // dropouts along the true outline
            let drop = rng.random_range(0.0..0.3);
            let blurred = gaussian_blur(&raw, rng.random_range(0.6..1.2));
            let peak = blurred.as_slice().iter().copied().fold(0.0, f64::max).max(1e-12);
            let pred = Grid::from_fn(size, size, |r, c| {
                let keep = if gt.get(r, c) && rng.random_bool(drop) { 0.3 } else { 1.0 };
                let v = keep * blurred.get(r, c) / peak + 0.05 * rng.random::<f64>();
                v.clamp(0.0, 1.0)
            });
            EdgePair { pred, gt }
        })
        .collect()
}
