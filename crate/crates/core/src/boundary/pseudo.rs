//! Fusing the refined object contour with image edges.

use crate::boundary::{canny_edges, crf_refine, trace_contours, CannyParams, CrfParams};
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, RgbImage, ScoreMap};

/// Contour pixels move to a Canny pixel at most this far away.
pub const SNAP_RADIUS: f64 = 2.0;

/// Offsets within the snap radius, nearest first, row-major among equals.
fn snap_offsets() -> Vec<(isize, isize)> {
    let r = SNAP_RADIUS.floor() as isize;
    let mut offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dr| (-r..=r).map(move |dc| (dr, dc)))
        .filter(|&(dr, dc)| ((dr * dr + dc * dc) as f64) <= SNAP_RADIUS * SNAP_RADIUS)
        .collect();
    offsets.sort_by_key(|&(dr, dc)| (dr * dr + dc * dc, dr, dc));
    offsets
}

/// Refine, binarize at 0.5, keep the longest outer contour, and snap each of
/// its pixels to the nearest Canny edge pixel within [`SNAP_RADIUS`].
pub fn make_pseudo_boundary(
    sem_map: &ScoreMap,
    rgb: &RgbImage,
    crf: &CrfParams,
    canny: &CannyParams,
) -> Result<BinaryMask> {
    let refined = crf_refine(sem_map, rgb, crf)?;
    let object = BinaryMask(refined.grid().map(|&v| v >= 0.5));
    let contours = trace_contours(&object);
    let mut longest = None;
    for c in &contours {
        if longest.is_none_or(|l: &crate::boundary::ContourPath| c.len() > l.len()) {
            longest = Some(c);
        }
    }
    let contour = longest.ok_or(Error::EmptyObject)?;
    let edges = canny_edges(&rgb.to_gray(), canny)?;
    let (h, w) = sem_map.dims();
    let offsets = snap_offsets();
    let mut out = BinaryMask::empty(h, w);
    for &(r, c) in &contour.points {
        let snapped = offsets
            .iter()
            .map(|&(dr, dc)| (r as isize + dr, c as isize + dc))
            .find(|&(nr, nc)| {
                nr >= 0 && nc >= 0 && nr < h as isize && nc < w as isize && edges.get(nr as usize, nc as usize)
            })
            .map_or((r, c), |(nr, nc)| (nr as usize, nc as usize));
        out.set(snapped.0, snapped.1, true);
    }
    Ok(out)
}
