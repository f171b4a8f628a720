//! Canny edge detection: Gaussian smoothing, central-difference gradients,
//! four-direction non-maximum suppression and hysteresis.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::grid::{BinaryMask, Grid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    /// Weak threshold as a fraction of the largest gradient magnitude.
    pub low_frac: f64,
    /// Strong threshold, same units.
    pub high_frac: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 1.4,
            low_frac: 0.1,
            high_frac: 0.3,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.low_frac && self.low_frac < self.high_frac && self.high_frac <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "canny thresholds need 0 < low < high <= 1, got {} and {}",
                self.low_frac, self.high_frac
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::InvalidArgument("canny sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Neighbour offset along the gradient for each quantized direction.
fn direction_step(gx: f64, gy: f64) -> (isize, isize) {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        (0, 1)
    } else if angle < 67.5 {
        (1, 1)
    } else if angle < 112.5 {
        (1, 0)
    } else {
        (1, -1)
    }
}

pub fn canny_edges(gray: &Grid<f64>, params: &CannyParams) -> Result<BinaryMask> {
    params.validate()?;
    let (h, w) = gray.dims();
    let smooth = gaussian_blur(gray, params.sigma);
    let gx = Grid::from_fn(h, w, |r, c| {
        let (r, c) = (r as isize, c as isize);
        (smooth.get_clamped(r, c + 1) - smooth.get_clamped(r, c - 1)) / 2.0
    });
    let gy = Grid::from_fn(h, w, |r, c| {
        let (r, c) = (r as isize, c as isize);
        (smooth.get_clamped(r + 1, c) - smooth.get_clamped(r - 1, c)) / 2.0
    });
    let mag = Grid::from_fn(h, w, |r, c| gx.get(r, c).hypot(gy.get(r, c)));
    let max = mag.as_slice().iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(BinaryMask::empty(h, w));
    }
    let at = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            mag.get(r as usize, c as usize)
        }
    };
    // Strictly above the previous neighbour, at least the next one: a
    // symmetric plateau of two keeps exactly one pixel.
    let thin = Grid::from_fn(h, w, |r, c| {
        let m = mag.get(r, c);
        let (dr, dc) = direction_step(gx.get(r, c), gy.get(r, c));
        let (r, c) = (r as isize, c as isize);
        if m > 0.0 && m > at(r - dr, c - dc) && m >= at(r + dr, c + dc) {
            m
        } else {
            0.0
        }
    });
    let low = params.low_frac * max;
    let high = params.high_frac * max;
    let mut out = BinaryMask::empty(h, w);
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            if thin.get(r, c) >= high {
                out.set(r, c, true);
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if !out.get(nr, nc) && thin.get(nr, nc) >= low && thin.get(nr, nc) > 0.0 {
                    out.set(nr, nc, true);
                    queue.push_back((nr, nc));
                }
            }
        }
    }
    Ok(out)
}
