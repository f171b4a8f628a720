//! Shared raster types and the map-level transforms every other module
//! builds on: min-max normalization, 8-bit quantization and bilinear
//! resizing.
//!
//! All rasters are row-major with the origin at the top-left and are indexed
//! as `(row, col)`.

use crate::error::{Error, Result};

/// A dense row-major 2-D raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T> Grid<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "grid dimensions must be non-zero, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be non-zero");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Grid {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    #[inline]
    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.width + c
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub(crate) fn check_same_dims<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

impl<T: Copy> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Grid::from_fn(height, width, |_, _| value)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        let i = r * self.width + c;
        self.data[i] = value;
    }

    /// Clamped access; out-of-range coordinates read the nearest edge pixel.
    #[inline]
    pub fn get_clamped(&self, r: isize, c: isize) -> T {
        let r = r.clamp(0, self.height as isize - 1) as usize;
        let c = c.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }
}

impl Grid<f64> {
    /// Build from nested rows; used mostly by tests and fixtures.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Grid::from_vec(height, width, rows.concat())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// A localization map with every value finite and inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap(Grid<f64>);

impl ScoreMap {
    pub fn new(grid: Grid<f64>) -> Result<Self> {
        if let Some((i, v)) = grid
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::InvalidInput(format!(
                "score map value {v} at (row {}, col {}) is outside [0, 1]",
                i / grid.width(),
                i % grid.width()
            )));
        }
        Ok(ScoreMap(grid))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        ScoreMap::new(Grid::from_rows(rows)?)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0.get(r, c)
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// A score map mapped onto the integer range `0..=255`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMap(pub Grid<u8>);

impl QuantizedMap {
    pub fn grid(&self) -> &Grid<u8> {
        &self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn values(&self) -> &[u8] {
        self.0.as_slice()
    }
}

/// A foreground/background mask. `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask(pub Grid<bool>);

impl BinaryMask {
    pub fn new(grid: Grid<bool>) -> Self {
        BinaryMask(grid)
    }

    pub fn empty(height: usize, width: usize) -> Self {
        BinaryMask(Grid::filled(height, width, false))
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        let data = rows.iter().flatten().map(|&v| v != 0).collect();
        Ok(BinaryMask(Grid::from_vec(height, width, data)?))
    }

    pub fn grid(&self) -> &Grid<bool> {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.0.get(r, c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.0.set(r, c, value)
    }

    pub fn values(&self) -> &[bool] {
        self.0.as_slice()
    }

    pub fn count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&v| v).count()
    }

    /// Foreground pixels that touch the background through a 4-neighbour.
    /// Pixels on the image border count as touching.
    pub fn boundary4(&self) -> BinaryMask {
        let (h, w) = self.dims();
        BinaryMask(Grid::from_fn(h, w, |r, c| {
            if !self.get(r, c) {
                return false;
            }
            if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
                return true;
            }
            !self.get(r - 1, c) || !self.get(r + 1, c) || !self.get(r, c - 1) || !self.get(r, c + 1)
        }))
    }
}

/// Channel-major `C x H x W` feature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureStack {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "feature stack dimensions must be non-zero, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::InvalidInput(format!(
                "feature stack {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature stack contains non-finite values".into()));
        }
        Ok(FeatureStack {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for ch in 0..channels {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(ch, r, c));
                }
            }
        }
        FeatureStack::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn spatial_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, ch: usize, r: usize, c: usize) -> f64 {
        self.data[(ch * self.height + r) * self.width + c]
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[ch * plane..(ch + 1) * plane]
    }

    /// The feature vector at one pixel.
    pub fn pixel(&self, r: usize, c: usize) -> Vec<f64> {
        (0..self.channels).map(|ch| self.get(ch, r, c)).collect()
    }

    /// Pixel-major copy: the `C` values of pixel `i` sit at `[i*C, (i+1)*C)`.
    pub fn to_pixel_major(&self) -> Vec<f64> {
        let plane = self.height * self.width;
        let mut out = vec![0.0; self.data.len()];
        for ch in 0..self.channels {
            for (i, &v) in self.channel(ch).iter().enumerate() {
                out[i * self.channels + ch] = v;
            }
        }
        debug_assert_eq!(out.len(), plane * self.channels);
        out
    }

    /// Bilinearly resize every channel to `out_h x out_w`.
    pub fn resize(&self, out_h: usize, out_w: usize) -> Result<FeatureStack> {
        if (out_h, out_w) == (self.height, self.width) {
            return Ok(self.clone());
        }
        let mut data = Vec::with_capacity(self.channels * out_h * out_w);
        for ch in 0..self.channels {
            let plane = Grid::from_vec(self.height, self.width, self.channel(ch).to_vec())?;
            data.extend(resize_grid(&plane, out_h, out_w)?.into_vec());
        }
        FeatureStack::new(self.channels, out_h, out_w, data)
    }
}

/// 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage(pub Grid<[u8; 3]>);

impl RgbImage {
    pub fn grid(&self) -> &Grid<[u8; 3]> {
        &self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    /// Luma `0.299 R + 0.587 G + 0.114 B`, on the 0..255 scale.
    pub fn to_gray(&self) -> Grid<f64> {
        self.0.map(|&[r, g, b]| {
            0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)
        })
    }
}

/// Min-max normalize a raw map into `[0, 1]`.
///
/// A constant input has no range to stretch; it maps to all zeros so that any
/// later thresholding classifies every pixel as background.
pub fn normalize_map(raw: &Grid<f64>) -> Result<ScoreMap> {
    if raw.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("map contains non-finite values".into()));
    }
    let (lo, hi) = raw.min_max();
    let range = hi - lo;
    let grid = if range > 0.0 {
        raw.map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
    } else {
        raw.map(|_| 0.0)
    };
    Ok(ScoreMap(grid))
}

/// `round(v * 255)` with halves rounded up.
pub fn quantize_map(map: &ScoreMap) -> QuantizedMap {
    QuantizedMap(map.grid().map(|&v| quantize_value(v)))
}

#[inline]
pub fn quantize_value(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Bilinear resize with half-pixel centres and edge clamping
/// (`src = (dst + 0.5) * in / out - 0.5`).
pub fn resize_bilinear(map: &ScoreMap, out_h: usize, out_w: usize) -> Result<ScoreMap> {
    resize_grid(map.grid(), out_h, out_w).map(ScoreMap)
}

pub fn resize_grid(grid: &Grid<f64>, out_h: usize, out_w: usize) -> Result<Grid<f64>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput(format!(
            "resize target must be non-zero, got {out_h}x{out_w}"
        )));
    }
    let (in_h, in_w) = grid.dims();
    if (in_h, in_w) == (out_h, out_w) {
        return Ok(grid.clone());
    }
    let rows: Vec<(usize, usize, f64)> = (0..out_h).map(|y| source_coord(y, in_h, out_h)).collect();
    let cols: Vec<(usize, usize, f64)> = (0..out_w).map(|x| source_coord(x, in_w, out_w)).collect();
    Ok(Grid::from_fn(out_h, out_w, |y, x| {
        let (r0, r1, fr) = rows[y];
        let (c0, c1, fc) = cols[x];
        let top = lerp(grid.get(r0, c0), grid.get(r0, c1), fc);
        let bottom = lerp(grid.get(r1, c0), grid.get(r1, c1), fc);
        lerp(top, bottom, fr)
    }))
}

fn source_coord(dst: usize, in_len: usize, out_len: usize) -> (usize, usize, f64) {
    let src = (dst as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5;
    let src = src.clamp(0.0, (in_len - 1) as f64);
    let i0 = src.floor() as usize;
    let i1 = (i0 + 1).min(in_len - 1);
    (i0, i1, src - i0 as f64)
}

/// Interpolate and clamp into the endpoint range so rounding can never push a
/// value outside its neighbours.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    let v = a + (b - a) * t;
    v.clamp(a.min(b), a.max(b))
}
