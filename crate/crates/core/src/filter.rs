//! Separable Gaussian smoothing with clamped borders.

use crate::grid::Grid;

/// Normalized 1-D kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

pub fn gaussian_blur(grid: &Grid<f64>, sigma: f64) -> Grid<f64> {
    if sigma <= 0.0 {
        return grid.clone();
    }
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as isize;
    let (h, w) = grid.dims();
    let horizontal: Grid<f64> = Grid::from_fn(h, w, |r, c| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * grid.get_clamped(r as isize, c as isize + i as isize - radius))
            .sum()
    });
    Grid::from_fn(h, w, |r, c| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * horizontal.get_clamped(r as isize + i as isize - radius, c as isize))
            .sum()
    })
}
