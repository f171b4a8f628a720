//! Class-balanced boundary loss with a hard-negative suppression term.
//!
//! For predictions `P` and binary labels `B` over `N` pixels, with
//! `alpha = |B+| / N` and `beta = |B-| / N`:
//!
//! ```text
//! L = -(1/N) sum [ beta B ln P + lambda alpha (1-B) ln(1-P) + alpha (1-B) P ln(1-P) ]
//! ```
//!
//! The last summand is dropped in vanilla mode. It grows with `P` on
//! negatives, so confident false positives cost more than timid ones.

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, FeatureStack, Grid};

pub const EPS: f64 = 1e-7;
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LossMode {
    Vanilla,
    #[default]
    Hns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

fn balance(positives: usize, total: usize, lambda: f64) -> LossWeights {
    let n = total.max(1) as f64;
    LossWeights {
        alpha: positives as f64 / n,
        beta: (total - positives) as f64 / n,
        lambda,
    }
}

pub fn class_balance_weights(gt: &BinaryMask) -> LossWeights {
    balance(gt.count(), gt.values().len(), DEFAULT_LAMBDA)
}

impl LossWeights {
    pub fn with_lambda(self, lambda: f64) -> Self {
        LossWeights { lambda, ..self }
    }
}

/// Edge probabilities clamped to `[EPS, 1 - EPS]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap(Grid<f64>);

impl EdgeMap {
    pub fn new(grid: Grid<f64>) -> Result<Self> {
        if let Some(v) = grid.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("edge probability {v} outside [0, 1]")));
        }
        Ok(EdgeMap(grid.map(|&v| clamp_prob(v))))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        EdgeMap::new(Grid::from_rows(rows)?)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Loss over flat slices. Summed in index order.
fn loss_flat(p: &[f64], b: &[bool], w: &LossWeights, mode: LossMode) -> f64 {
    let n = p.len() as f64;
    let mut sum = 0.0;
    for (&p, &b) in p.iter().zip(b) {
        let p = clamp_prob(p);
        sum += if b {
            w.beta * p.ln()
        } else {
            let log_neg = (1.0 - p).ln();
            let hns = match mode {
                LossMode::Hns => w.alpha * p * log_neg,
                LossMode::Vanilla => 0.0,
            };
            w.lambda * w.alpha * log_neg + hns
        };
    }
    -sum / n
}

/// `dL/dP` for one pixel.
fn grad_one(p: f64, b: bool, w: &LossWeights, mode: LossMode, n: f64) -> f64 {
    let p = clamp_prob(p);
    if b {
        -w.beta / (n * p)
    } else {
        let base = w.lambda * w.alpha / (n * (1.0 - p));
        match mode {
            LossMode::Hns => base + w.alpha / n * (-(1.0 - p).ln() + p / (1.0 - p)),
            LossMode::Vanilla => base,
        }
    }
}

fn check(pred: &EdgeMap, gt: &BinaryMask) -> Result<()> {
    pred.grid().check_same_dims(gt.grid())
}

pub fn hns_loss(pred: &EdgeMap, gt: &BinaryMask, lambda: f64, mode: LossMode) -> Result<f64> {
    check(pred, gt)?;
    let w = class_balance_weights(gt).with_lambda(lambda);
    Ok(loss_flat(pred.values(), gt.values(), &w, mode))
}

pub fn hns_gradient(pred: &EdgeMap, gt: &BinaryMask, lambda: f64, mode: LossMode) -> Result<Grid<f64>> {
    check(pred, gt)?;
    let w = class_balance_weights(gt).with_lambda(lambda);
    let n = pred.values().len() as f64;
    let data = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&p, &b)| grad_one(p, b, &w, mode, n))
        .collect();
    Grid::from_vec(pred.grid().height(), pred.grid().width(), data)
}

/// Per-pixel linear map followed by a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearPredictor {
    pub fn zeros(channels: usize) -> Self {
        LinearPredictor {
            weights: vec![0.0; channels],
            bias: 0.0,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let z: f64 = self.bias + self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }

    /// Score map over a whole feature stack.
    pub fn predict(&self, features: &FeatureStack) -> Result<EdgeMap> {
        if features.channels() != self.weights.len() {
            return Err(Error::InvalidInput(format!(
                "predictor has {} weights, features have {} channels",
                self.weights.len(),
                features.channels()
            )));
        }
        let (h, w) = features.spatial_dims();
        EdgeMap::new(Grid::from_fn(h, w, |r, c| self.score(&features.pixel(r, c))))
    }

    /// Weights followed by the bias.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub steps: usize,
    pub lr: f64,
    pub lambda: f64,
    pub mode: LossMode,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            steps: 500,
            lr: 1.0,
            lambda: DEFAULT_LAMBDA,
            mode: LossMode::Hns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FitMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Mean score over held-out hard negatives.
    pub mean_hard_negative: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub predictor: LinearPredictor,
    pub metrics: FitMetrics,
}

/// One image of training data. `hard_negatives` restricts the hard-negative
/// statistic; by default it covers every negative pixel.
#[derive(Debug, Clone, Copy)]
pub struct FitImage<'a> {
    pub features: &'a FeatureStack,
    pub edges: &'a BinaryMask,
    pub hard_negatives: Option<&'a BinaryMask>,
}

struct Sample {
    x: Vec<f64>,
    label: bool,
    hard: bool,
}

/// Pixels with even `row + col` train, odd ones are held out.
fn split(images: &[FitImage<'_>]) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let (mut train, mut held) = (Vec::new(), Vec::new());
    let channels = images.first().map(|i| i.features.channels());
    for img in images {
        if img.features.spatial_dims() != img.edges.dims() {
            return Err(Error::Dimension {
                expected: img.edges.dims(),
                found: img.features.spatial_dims(),
            });
        }
        if Some(img.features.channels()) != channels {
            return Err(Error::InvalidInput("feature stacks differ in channel count".into()));
        }
        if let Some(hard) = img.hard_negatives {
            img.edges.grid().check_same_dims(hard.grid())?;
        }
        let (h, w) = img.edges.dims();
        for r in 0..h {
            for c in 0..w {
                let label = img.edges.get(r, c);
                let s = Sample {
                    x: img.features.pixel(r, c),
                    label,
                    hard: !label && img.hard_negatives.is_none_or(|m| m.get(r, c)),
                };
                if (r + c) % 2 == 0 {
                    train.push(s);
                } else {
                    held.push(s);
                }
            }
        }
    }
    Ok((train, held))
}

fn evaluate(model: &LinearPredictor, held: &[Sample]) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    let (mut hard_sum, mut hard_n) = (0.0, 0usize);
    for s in held {
        let p = model.score(&s.x);
        match (p >= 0.5, s.label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
        if s.hard {
            hard_sum += p;
            hard_n += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(tp, tp + fp), ratio(tp, tp + fn_), if hard_n == 0 { 0.0 } else { hard_sum / hard_n as f64 })
}

/// Full-batch gradient descent from zero weights.
pub fn toy_fit_images(images: &[FitImage<'_>], config: &FitConfig) -> Result<FitResult> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", config.lr)));
    }
    let (train, held) = split(images)?;
    let labels: Vec<bool> = train.iter().map(|s| s.label).collect();
    let weights = balance(labels.iter().filter(|&&b| b).count(), labels.len(), config.lambda);
    let n = train.len() as f64;
    let channels = images[0].features.channels();
    let mut model = LinearPredictor::zeros(channels);
    let loss_of = |m: &LinearPredictor| {
        let p: Vec<f64> = train.iter().map(|s| m.score(&s.x)).collect();
        loss_flat(&p, &labels, &weights, config.mode)
    };
    let initial = loss_of(&model);
    let mut loss = initial;
    for step in 1..=config.steps {
        let mut gw = vec![0.0; channels];
        let mut gb = 0.0;
        for s in &train {
            // clamped so saturated pixels keep a gradient
            let p = clamp_prob(model.score(&s.x));
            let dz = grad_one(p, s.label, &weights, config.mode, n) * p * (1.0 - p);
            gw.iter_mut().zip(&s.x).for_each(|(g, x)| *g += dz * x);
            gb += dz;
        }
        model.weights.iter_mut().zip(&gw).for_each(|(w, g)| *w -= config.lr * g);
        model.bias -= config.lr * gb;
        loss = loss_of(&model);
        if !loss.is_finite() || loss > 10.0 * initial {
            return Err(Error::Divergence { step, loss, initial });
        }
    }
    let (precision, recall, mean_hard_negative) = evaluate(&model, &held);
    Ok(FitResult {
        predictor: model,
        metrics: FitMetrics {
            precision,
            recall,
            mean_hard_negative,
            initial_loss: initial,
            final_loss: loss,
        },
    })
}

pub fn toy_fit(features: &FeatureStack, pseudo_edges: &BinaryMask, config: &FitConfig) -> Result<FitResult> {
    toy_fit_images(
        &[FitImage {
            features,
            edges: pseudo_edges,
            hard_negatives: None,
        }],
        config,
    )
}
