//! Moore-neighbour tracing of outer component boundaries.

use crate::box_eval::{connected_components, Connectivity};
use crate::grid::BinaryMask;

/// Clockwise on screen (rows grow downward), starting west.
const DIRS: [(isize, isize); 8] = [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourPath {
    /// `(row, col)`, consecutive points 8-adjacent.
    pub points: Vec<(usize, usize)>,
    pub closed: bool,
}

impl ContourPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn direction_index(dr: isize, dc: isize) -> usize {
    DIRS.iter().position(|&d| d == (dr, dc)).expect("neighbouring pixels")
}

/// One clockwise outer contour per 8-connected component, in the order of
/// each component's first row-major pixel.
pub fn trace_contours(mask: &BinaryMask) -> Vec<ContourPath> {
    let (h, w) = mask.dims();
    let fg = |r: isize, c: isize| r >= 0 && c >= 0 && r < h as isize && c < w as isize && mask.get(r as usize, c as usize);
    let labeling = connected_components(mask, Connectivity::Eight);
    let mut starts = vec![None; labeling.count()];
    for r in 0..h {
        for c in 0..w {
            let l = labeling.labels.get(r, c) as usize;
            if l > 0 && starts[l - 1].is_none() {
                starts[l - 1] = Some((r, c));
            }
        }
    }

    // Moore neighbour step: from `p`, scan clockwise starting after the
    // backtrack direction; return the next pixel and its backtrack.
    let step = |p: (isize, isize), back: usize| -> Option<((isize, isize), usize)> {
        for i in 1..=8 {
            let d = (back + i) % 8;
            let n = (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
            if fg(n.0, n.1) {
                let prev = (back + i - 1) % 8;
                let q = (p.0 + DIRS[prev].0, p.1 + DIRS[prev].1);
                return Some((n, direction_index(q.0 - n.0, q.1 - n.1)));
            }
        }
        None
    };

    let cap = 4 * h * w + 8;
    starts
        .into_iter()
        .flatten()
        .map(|(r, c)| {
            let start = (r as isize, c as isize);
            let mut points = vec![(r, c)];
            // the west neighbour of a first row-major pixel is background
            let Some((first, mut back)) = step(start, 0) else {
                return ContourPath { points, closed: true };
            };
            let mut p = first;
            for _ in 0..cap {
                if p == start {
                    let (n, b) = step(p, back).expect("start has a neighbour");
                    if n == first {
                        break;
                    }
                    points.push((p.0 as usize, p.1 as usize));
                    p = n;
                    back = b;
                    continue;
                }
                points.push((p.0 as usize, p.1 as usize));
                let (n, b) = step(p, back).expect("traced pixel has a neighbour");
                p = n;
                back = b;
            }
            ContourPath { points, closed: true }
        })
        .collect()
}
