//! Windowed mean-field refinement of a foreground probability map.
//!
//! Two labels with a Potts compatibility. The pairwise kernel combines a
//! spatial and an appearance Gaussian and is restricted to a square window:
//!
//! ```text
//! k(p, q) = exp(-|p - q|^2 / (2 ss^2) - |I_p - I_q|^2 / (2 sa^2))
//! E_fg(p) = U_fg(p) + w * sum_q k(p, q) Q_bg(q) / sum_q k(p, q)
//! Q_fg(p) = 1 / (1 + exp(E_fg(p) - E_bg(p)))
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, RgbImage, ScoreMap};

/// Floor on probabilities before taking logs.
const PROB_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrfParams {
    pub iterations: usize,
    pub window_radius: usize,
    pub spatial_sigma: f64,
    pub appearance_sigma: f64,
    pub compat_weight: f64,
}

impl Default for CrfParams {
    fn default() -> Self {
        CrfParams {
            iterations: 5,
            window_radius: 7,
            spatial_sigma: 3.0,
            appearance_sigma: 13.0,
            compat_weight: 1.0,
        }
    }
}

impl CrfParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("crf iterations must be at least 1".into()));
        }
        if self.window_radius == 0 {
            return Err(Error::InvalidArgument("crf window radius must be at least 1".into()));
        }
        if !(self.spatial_sigma > 0.0 && self.appearance_sigma > 0.0) {
            return Err(Error::InvalidArgument("crf sigmas must be positive".into()));
        }
        if !self.compat_weight.is_finite() {
            return Err(Error::InvalidArgument("crf compatibility weight must be finite".into()));
        }
        Ok(())
    }
}

fn color_dist2(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

pub fn crf_refine(unary: &ScoreMap, rgb: &RgbImage, params: &CrfParams) -> Result<ScoreMap> {
    params.validate()?;
    if unary.dims() != rgb.dims() {
        return Err(Error::Dimension {
            expected: unary.dims(),
            found: rgb.dims(),
        });
    }
    let (h, w) = unary.dims();
    let r = params.window_radius as isize;
    let unary_fg: Vec<f64> = unary.values().iter().map(|&p| -p.max(PROB_FLOOR).ln()).collect();
    let unary_bg: Vec<f64> = unary
        .values()
        .iter()
        .map(|&p| -(1.0 - p).max(PROB_FLOOR).ln())
        .collect();
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dr| (-r..=r).map(move |dc| (dr, dc)))
        .map(|(dr, dc)| (-((dr * dr + dc * dc) as f64) / (2.0 * params.spatial_sigma.powi(2))).exp())
        .collect();
    let img = rgb.grid();
    let appearance_den = 2.0 * params.appearance_sigma.powi(2);
    let side = 2 * r + 1;

    let mut q: Vec<f64> = unary.values().to_vec();
    for _ in 0..params.iterations {
        let prev = &q;
        q = (0..h * w)
            .into_par_iter()
            .map(|i| {
                let (pr, pc) = ((i / w) as isize, (i % w) as isize);
                let color = img.get(pr as usize, pc as usize);
                let (mut ksum, mut kfg) = (0.0, 0.0);
                for dr in -r..=r {
                    let nr = pr + dr;
                    if nr < 0 || nr >= h as isize {
                        continue;
                    }
                    for dc in -r..=r {
                        let nc = pc + dc;
                        if (dr == 0 && dc == 0) || nc < 0 || nc >= w as isize {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        let k = spatial[((dr + r) * side + dc + r) as usize]
                            * (-color_dist2(color, img.get(nr, nc)) / appearance_den).exp();
                        ksum += k;
                        kfg += k * prev[nr * w + nc];
                    }
                }
                let (msg_fg, msg_bg) = if ksum > 0.0 {
                    // fg pays for disagreeing (bg) neighbours and vice versa
                    ((ksum - kfg) / ksum, kfg / ksum)
                } else {
                    (0.0, 0.0)
                };
                let e_fg = unary_fg[i] + params.compat_weight * msg_fg;
                let e_bg = unary_bg[i] + params.compat_weight * msg_bg;
                1.0 / (1.0 + (e_fg - e_bg).exp())
            })
            .collect();
    }
    ScoreMap::new(Grid::from_vec(h, w, q)?)
}
