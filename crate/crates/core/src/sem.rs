//! Self-enhancement of a first-stage localization map.
//!
//! The `k` highest-scoring pixels of the first-stage map are taken as seeds.
//! Every pixel is scored by its best cosine similarity to any seed feature
//! vector, and the result is min-max normalized:
//!
//! ```text
//! sem(i, j) = normalize( max_k cos(F[:, seed_k], F[:, i, j]) )
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{normalize_map, FeatureStack, Grid, ScoreMap};

/// Seed count used when none is given.
pub const DEFAULT_K: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    /// `(row, col)` at feature resolution, best first.
    pub positions: Vec<(usize, usize)>,
    /// First-stage scores at `positions`, non-increasing.
    pub scores: Vec<f64>,
}

impl SeedSet {
    pub fn k(&self) -> usize {
        self.positions.len()
    }
}

/// One similarity map per seed, values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityStack {
    pub maps: Vec<Grid<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemOptions {
    pub k: usize,
    /// Clamp negative similarities to zero before normalizing. Off by default.
    pub clamp_negative: bool,
}

impl Default for SemOptions {
    fn default() -> Self {
        SemOptions {
            k: DEFAULT_K,
            clamp_negative: false,
        }
    }
}

impl SemOptions {
    pub fn with_k(k: usize) -> Self {
        SemOptions {
            k,
            ..SemOptions::default()
        }
    }
}

/// The `k` highest-scoring pixels. Equal scores are ordered row-major.
pub fn select_seeds(map: &ScoreMap, k: usize) -> Result<SeedSet> {
    let n = map.values().len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, max: n });
    }
    let values = map.values();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep row-major order
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order.truncate(k);
    let w = map.width();
    Ok(SeedSet {
        positions: order.iter().map(|&i| (i / w, i % w)).collect(),
        scores: order.iter().map(|&i| values[i]).collect(),
    })
}

/// Per-pixel unit vectors (pixel-major); zero vectors stay zero.
struct UnitFeatures {
    channels: usize,
    width: usize,
    units: Vec<f64>,
}

impl UnitFeatures {
    fn new(features: &FeatureStack) -> Self {
        let channels = features.channels();
        let mut units = features.to_pixel_major();
        for v in units.chunks_exact_mut(channels) {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
        UnitFeatures {
            channels,
            width: features.width(),
            units,
        }
    }

    fn pixel(&self, i: usize) -> &[f64] {
        &self.units[i * self.channels..(i + 1) * self.channels]
    }

    fn is_zero(&self, i: usize) -> bool {
        self.pixel(i).iter().all(|&x| x == 0.0)
    }

    /// Cosine similarity between two pixels. Zero-norm vectors score 0, a
    /// pixel compared with itself scores exactly 1.
    #[inline]
    fn cosine(&self, seed: usize, pixel: usize) -> f64 {
        if seed == pixel {
            return if self.is_zero(seed) { 0.0 } else { 1.0 };
        }
        let dot: f64 = self
            .pixel(seed)
            .iter()
            .zip(self.pixel(pixel))
            .map(|(a, b)| a * b)
            .sum();
        dot.clamp(-1.0, 1.0)
    }
}

fn check_seeds(features: &FeatureStack, seeds: &SeedSet) -> Result<()> {
    let (h, w) = features.spatial_dims();
    if let Some(&(r, c)) = seeds.positions.iter().find(|&&(r, c)| r >= h || c >= w) {
        return Err(Error::InvalidInput(format!(
            "seed ({r}, {c}) outside {h}x{w} feature map"
        )));
    }
    Ok(())
}

pub fn similarity_maps(features: &FeatureStack, seeds: &SeedSet) -> Result<SimilarityStack> {
    check_seeds(features, seeds)?;
    let unit = UnitFeatures::new(features);
    let (h, w) = features.spatial_dims();
    let maps = seeds
        .positions
        .par_iter()
        .map(|&(r, c)| {
            let seed = r * unit.width + c;
            let data = (0..h * w).map(|p| unit.cosine(seed, p)).collect();
            Grid::from_vec(h, w, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityStack { maps })
}

/// Pointwise maximum over the stack (not normalized).
pub fn aggregate_max(stack: &SimilarityStack) -> Result<Grid<f64>> {
    let (first, rest) = stack
        .maps
        .split_first()
        .ok_or_else(|| Error::InvalidInput("empty similarity stack".into()))?;
    let mut out = first.clone();
    for map in rest {
        out.check_same_dims(map)?;
        let merged: Vec<f64> = out
            .as_slice()
            .iter()
            .zip(map.as_slice())
            .map(|(a, b)| a.max(*b))
            .collect();
        out = Grid::from_vec(out.height(), out.width(), merged)?;
    }
    Ok(out)
}

/// The max-aggregated similarity map before normalization. Computed per pixel
/// without materializing the `k` intermediate maps.
pub fn sem_aggregate(features: &FeatureStack, first_stage: &ScoreMap, k: usize) -> Result<Grid<f64>> {
    if features.spatial_dims() != first_stage.dims() {
        return Err(Error::Dimension {
            expected: first_stage.dims(),
            found: features.spatial_dims(),
        });
    }
    let seeds = select_seeds(first_stage, k)?;
    let unit = UnitFeatures::new(features);
    let (h, w) = features.spatial_dims();
    let seed_idx: Vec<usize> = seeds.positions.iter().map(|&(r, c)| r * w + c).collect();
    let data: Vec<f64> = (0..h * w)
        .into_par_iter()
        .map(|p| {
            seed_idx
                .iter()
                .map(|&s| unit.cosine(s, p))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Grid::from_vec(h, w, data)
}

/// Seeds from `first_stage`, similarity against `features`, max aggregation,
/// then per-map min-max normalization.
pub fn sem_enhance(features: &FeatureStack, first_stage: &ScoreMap, k: usize) -> Result<ScoreMap> {
    sem_enhance_with(features, first_stage, SemOptions::with_k(k))
}

pub fn sem_enhance_with(
    features: &FeatureStack,
    first_stage: &ScoreMap,
    options: SemOptions,
) -> Result<ScoreMap> {
    let mut aggregate = sem_aggregate(features, first_stage, options.k)?;
    if options.clamp_negative {
        aggregate = aggregate.map(|&v| v.max(0.0));
    }
    normalize_map(&aggregate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stack_from_pixels(h: usize, w: usize, pixels: &[Vec<f64>]) -> FeatureStack {
        let c = pixels[0].len();
        FeatureStack::from_fn(c, h, w, |ch, r, col| pixels[r * w + col][ch]).unwrap()
    }

    fn random_case(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> (FeatureStack, ScoreMap) {
        let f = FeatureStack::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0)).unwrap();
        let m = ScoreMap::new(Grid::from_fn(h, w, |_, _| rng.random::<f64>())).unwrap();
        (f, m)
    }

    #[test]
    fn seeds_two_strict_maxima() {
        let m = ScoreMap::from_rows(&[vec![0.9, 0.1], vec![0.5, 0.7]]).unwrap();
        let s = select_seeds(&m, 2).unwrap();
        assert_eq!(s.positions, vec![(0, 0), (1, 1)]);
        assert_eq!(s.scores, vec![0.9, 0.7]);
    }

    #[test]
    fn seeds_tie_rule_is_row_major() {
        let m = ScoreMap::new(Grid::filled(3, 3, 0.4)).unwrap();
        let s = select_seeds(&m, 3).unwrap();
        assert_eq!(s.positions, vec![(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn seeds_k_out_of_range() {
        let m = ScoreMap::new(Grid::filled(2, 2, 0.4)).unwrap();
        assert!(matches!(select_seeds(&m, 0), Err(Error::InvalidK { k: 0, max: 4 })));
        assert!(matches!(select_seeds(&m, 5), Err(Error::InvalidK { k: 5, max: 4 })));
    }

    #[test]
    fn seeds_match_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = ScoreMap::new(Grid::from_fn(16, 16, |_, _| rng.random::<f64>())).unwrap();
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for r in 0..16 {
            for c in 0..16 {
                all.push((m.get(r, c), r, c));
            }
        }
        // descending by score, ascending by position
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then((a.1, a.2).cmp(&(b.1, b.2))));
        let expected: Vec<_> = all[..10].iter().map(|&(_, r, c)| (r, c)).collect();
        assert_eq!(select_seeds(&m, 10).unwrap().positions, expected);
    }

    #[test]
    fn cosine_examples() {
        let f = stack_from_pixels(1, 3, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.8, 0.6]]);
        let seeds = SeedSet {
            positions: vec![(0, 0)],
            scores: vec![1.0],
        };
        let s = similarity_maps(&f, &seeds).unwrap();
        let m = &s.maps[0];
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert!((m.get(0, 2) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_vectors_score_zero() {
        let f = stack_from_pixels(1, 2, &[vec![0.0, 0.0], vec![3.0, 1.0]]);
        let seeds = SeedSet {
            positions: vec![(0, 0), (0, 1)],
            scores: vec![1.0, 0.5],
        };
        let s = similarity_maps(&f, &seeds).unwrap();
        assert_eq!(s.maps[0].as_slice(), &[0.0, 0.0]);
        assert_eq!(s.maps[1].as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn aggregate_examples() {
        let a = Grid::from_rows(&[vec![0.2, 0.9]]).unwrap();
        let b = Grid::from_rows(&[vec![0.5, 0.1]]).unwrap();
        let single = aggregate_max(&SimilarityStack { maps: vec![a.clone()] }).unwrap();
        assert_eq!(single, a);
        let both = aggregate_max(&SimilarityStack { maps: vec![a, b] }).unwrap();
        assert_eq!(both.as_slice(), &[0.5, 0.9]);
        assert!(matches!(
            aggregate_max(&SimilarityStack { maps: vec![] }),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn aggregate_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let maps: Vec<_> = (0..20)
            .map(|_| Grid::from_fn(5, 6, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let agg = aggregate_max(&SimilarityStack { maps: maps.clone() }).unwrap();
        for r in 0..5 {
            for c in 0..6 {
                let mut best = f64::NEG_INFINITY;
                for m in &maps {
                    if m.get(r, c) > best {
                        best = m.get(r, c);
                    }
                }
                assert_eq!(agg.get(r, c), best);
            }
        }
    }

    #[test]
    fn single_seed_collapses_to_normalized_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (f, m) = random_case(&mut rng, 5, 7, 9);
        let seeds = select_seeds(&m, 1).unwrap();
        let sim = similarity_maps(&f, &seeds).unwrap();
        let expected = normalize_map(&sim.maps[0]).unwrap();
        assert_eq!(sem_enhance(&f, &m, 1).unwrap(), expected);
    }

    #[test]
    fn orthogonal_clusters_give_extremes() {
        let (h, w) = (6, 6);
        let object = |r: usize, c: usize| (1..4).contains(&r) && (2..5).contains(&c);
        let f = FeatureStack::from_fn(2, h, w, |ch, r, c| match (object(r, c), ch) {
            (true, 0) | (false, 1) => 1.0,
            _ => 0.0,
        })
        .unwrap();
        let m = ScoreMap::new(Grid::from_fn(h, w, |r, c| if (r, c) == (2, 3) { 1.0 } else { 0.1 })).unwrap();
        let sem = sem_enhance(&f, &m, 1).unwrap();
        for r in 0..h {
            for c in 0..w {
                assert_eq!(sem.get(r, c), if object(r, c) { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn streaming_aggregate_matches_materialized() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (f, m) = random_case(&mut rng, 6, 8, 8);
        let seeds = select_seeds(&m, 12).unwrap();
        let materialized = aggregate_max(&similarity_maps(&f, &seeds).unwrap()).unwrap();
        assert_eq!(sem_aggregate(&f, &m, 12).unwrap(), materialized);
    }

    #[test]
    fn seeds_reach_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (f, m) = random_case(&mut rng, 4, 10, 10);
        let seeds = select_seeds(&m, 7).unwrap();
        let agg = sem_aggregate(&f, &m, 7).unwrap();
        let sem = sem_enhance(&f, &m, 7).unwrap();
        for &(r, c) in &seeds.positions {
            assert_eq!(agg.get(r, c), 1.0);
            assert_eq!(sem.get(r, c), 1.0);
        }
    }

    #[test]
    fn scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let (f, m) = random_case(&mut rng, 4, 9, 9);
        let scales: Vec<f64> = (0..81).map(|_| rng.random_range(0.1..10.0)).collect();
        let global = FeatureStack::from_fn(4, 9, 9, |ch, r, c| 3.5 * f.get(ch, r, c)).unwrap();
        let local = FeatureStack::from_fn(4, 9, 9, |ch, r, c| scales[r * 9 + c] * f.get(ch, r, c)).unwrap();
        let base = sem_enhance(&f, &m, 5).unwrap();
        for other in [global, local] {
            let s = sem_enhance(&other, &m, 5).unwrap();
            for (a, b) in base.values().iter().zip(s.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seed_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (f, m) = random_case(&mut rng, 3, 6, 6);
        let mut seeds = select_seeds(&m, 9).unwrap();
        let a = aggregate_max(&similarity_maps(&f, &seeds).unwrap()).unwrap();
        seeds.positions.reverse();
        seeds.positions.swap(0, 4);
        let b = aggregate_max(&similarity_maps(&f, &seeds).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clamp_option_zeroes_negatives() {
        let f = stack_from_pixels(1, 3, &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]);
        let m = ScoreMap::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let plain = sem_enhance(&f, &m, 1).unwrap();
        assert_eq!(plain.values(), &[1.0, 0.0, 0.5]);
        let clamped = sem_enhance_with(&f, &m, SemOptions { k: 1, clamp_negative: true }).unwrap();
        assert_eq!(clamped.values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch() {
        let f = FeatureStack::new(1, 2, 2, vec![1.0; 4]).unwrap();
        let m = ScoreMap::new(Grid::filled(3, 2, 0.5)).unwrap();
        assert!(matches!(sem_enhance(&f, &m, 1), Err(Error::Dimension { .. })));
    }
}
