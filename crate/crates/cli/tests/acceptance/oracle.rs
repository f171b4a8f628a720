//! Brute-force reference implementations, written straight from the
//! definitions with no shared code from the library.

/// (tp, fp, fn, tn) for `map >= t` against `gt`.
pub fn counts(map: &[u8], gt: &[bool], t: u8) -> [u64; 4] {
    let mut c = [0u64; 4];
    for (&v, &g) in map.iter().zip(gt) {
        let p = v >= t;
        let slot = match (p, g) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        c[slot] += 1;
    }
    c
}

pub fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn iou(c: [u64; 4]) -> f64 {
    ratio(c[0], c[0] + c[1] + c[2])
}

/// Macro mean IoU, micro precision / recall, and the step AP, over a set of
/// (map, mask) pairs.
pub struct CurveOracle {
    pub mean_iou: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub ap: f64,
    pub peak_iou: f64,
    pub peak_t: usize,
}

pub fn curve(pairs: &[(Vec<u8>, Vec<bool>)]) -> CurveOracle {
    let mut mean_iou = vec![0.0; 256];
    let mut precision = vec![0.0; 256];
    let mut recall = vec![0.0; 256];
    for t in 0..256 {
        let mut total = [0u64; 4];
        let mut iou_sum = 0.0;
        for (map, gt) in pairs {
            let c = counts(map, gt, t as u8);
            iou_sum += iou(c);
            for i in 0..4 {
                total[i] += c[i];
            }
        }
        mean_iou[t] = iou_sum / pairs.len() as f64;
        precision[t] = ratio(total[0], total[0] + total[1]);
        recall[t] = ratio(total[0], total[0] + total[2]);
    }
    let mut ap = 0.0;
    for t in 0..256 {
        let next = if t == 255 { 0.0 } else { recall[t + 1] };
        ap += (recall[t] - next) * precision[t];
    }
    let mut peak_t = 0;
    for t in 0..256 {
        if mean_iou[t] > mean_iou[peak_t] {
            peak_t = t;
        }
    }
    CurveOracle {
        peak_iou: mean_iou[peak_t],
        peak_t,
        mean_iou,
        precision,
        recall,
        ap,
    }
}

/// Box `(x0, y0, x1, y1)` of the largest 8-connected component of
/// `map >= thr * max`; ties go to the component met first in raster order.
pub fn largest_box(map: &[f64], h: usize, w: usize, thr: f64) -> Option<(usize, usize, usize, usize)> {
    let max = map.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return None;
    }
    let fg: Vec<bool> = map.iter().map(|&v| v >= thr * max).collect();
    let mut seen = vec![false; h * w];
    let mut best: Option<(usize, (usize, usize, usize, usize))> = None;
    for start in 0..h * w {
        if !fg[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut size = 0;
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(p) = stack.pop() {
            let (r, c) = (p / w, p % w);
            size += 1;
            x0 = x0.min(c);
            y0 = y0.min(r);
            x1 = x1.max(c);
            y1 = y1.max(r);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr < 0 || cc < 0 || rr >= h as i64 || cc >= w as i64 {
                        continue;
                    }
                    let q = rr as usize * w + cc as usize;
                    if fg[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, (x0, y0, x1, y1)));
        }
    }
    best.map(|(_, b)| b)
}

/// Self-enhancement by straight loops: pick seeds one at a time (highest
/// score, lowest raster index on ties), cosine against every pixel, max,
/// then min-max. `features` is `c x h x w`. Returns (aggregate, normalized).
pub fn sem(features: &[f64], c: usize, h: usize, w: usize, first: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = h * w;
    let mut taken = vec![false; n];
    let mut seeds = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for p in 0..n {
            if !taken[p] && best.is_none_or(|b| first[p] > first[b]) {
                best = Some(p);
            }
        }
        let b = best.expect("k <= n");
        taken[b] = true;
        seeds.push(b);
    }
    let feat = |ch: usize, p: usize| features[ch * n + p];
    let norm = |p: usize| (0..c).map(|ch| feat(ch, p).powi(2)).sum::<f64>().sqrt();
    let mut agg = vec![f64::NEG_INFINITY; n];
    for &s in &seeds {
        for (p, slot) in agg.iter_mut().enumerate() {
            let (ns, np) = (norm(s), norm(p));
            let cos = if ns == 0.0 || np == 0.0 {
                0.0
            } else {
                (0..c).map(|ch| feat(ch, s) * feat(ch, p)).sum::<f64>() / (ns * np)
            };
            *slot = slot.max(cos);
        }
    }
    let lo = agg.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = agg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let normalized = agg
        .iter()
        .map(|&v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect();
    (agg, normalized)
}
