//! Empirical density estimation on symmetric grids: histograms, Gaussian
//! kernel density estimates (computed by FFT convolution of the histogram),
//! and the Silverman bandwidth rule.

use crate::error::{invalid, Error, Result};
use crate::fft::ConvolutionEngine;
use crate::grid::{GridDensity, GridSpec};
use crate::oracle::standard_normal_pdf;

/// Bin index along one axis, or `None` if the coordinate is outside the
/// closed interval `[-L, L]`. Points exactly on the right edge fall into the
/// last cell; points exactly on interior edges fall into the cell to their
/// right.
fn axis_cell(x: f64, half_width: f64, cell_width: f64, cells: usize) -> Option<usize> {
    if !(x.abs() <= half_width) {
        return None;
    }
    let u = ((x + half_width) / cell_width).floor();
    Some((u.max(0.0) as usize).min(cells - 1))
}

/// Histogram density: per-cell counts divided by `N * w^d`. Points outside
/// the box are dropped from the counts (so the recorded mass is the retained
/// fraction); if more than 0.1% of the points escape, the call fails with a
/// diagnostic advising a larger box.
pub fn histogram(positions: &[[f64; 2]], grid: GridSpec) -> Result<GridDensity> {
    if positions.is_empty() {
        return Err(invalid("histogram needs at least one point"));
    }
    let w = grid.cell_width();
    let l = grid.half_width;
    let m = grid.cells;
    let mut counts = vec![0u64; grid.len()];
    let mut escaped = 0usize;
    match grid.dim {
        1 => {
            for p in positions {
                match axis_cell(p[0], l, w, m) {
                    Some(i) => counts[i] += 1,
                    None => escaped += 1,
                }
            }
        }
        _ => {
            for p in positions {
                match (axis_cell(p[0], l, w, m), axis_cell(p[1], l, w, m)) {
                    (Some(ix), Some(iy)) => counts[grid.index2(ix, iy)] += 1,
                    _ => escaped += 1,
                }
            }
        }
    }
    let total = positions.len();
    let fraction = 100.0 * escaped as f64 / total as f64;
    if fraction > 0.1 {
        return Err(Error::EscapeThreshold {
            escaped,
            total,
            fraction,
        });
    }
    let scale = 1.0 / (total as f64 * grid.cell_volume());
    GridDensity::new(grid, counts.iter().map(|&c| c as f64 * scale).collect())
}

/// Gaussian kernel density estimate: the histogram convolved with a Gaussian
/// of standard deviation `bandwidth` (lattice FFT convolution), renormalized
/// to unit mass on the box.
pub fn kde(positions: &[[f64; 2]], grid: GridSpec, bandwidth: f64) -> Result<GridDensity> {
    kde_of_histogram(&histogram(positions, grid)?, bandwidth)
}

/// The smoothing stage of [`kde`], reusable when several bandwidths are
/// applied to one histogram.
pub fn kde_of_histogram(hist: &GridDensity, bandwidth: f64) -> Result<GridDensity> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(invalid(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    let grid = hist.grid;
    let h = bandwidth;
    let engine = match grid.dim {
        1 => ConvolutionEngine::from_stencil(grid, 1, |_, off| standard_normal_pdf(off[0] / h) / h)?,
        _ => ConvolutionEngine::from_stencil(grid, 1, |_, off| {
            standard_normal_pdf(off[0] / h) * standard_normal_pdf(off[1] / h) / (h * h)
        })?,
    };
    let vol = grid.cell_volume();
    let charges: Vec<f64> = hist.values.iter().map(|&v| v * vol).collect();
    let mut out = engine.convolve(&charges)?.pop().expect("one component");
    // FFT rounding can leave values a few ulps below zero.
    for v in &mut out {
        *v = v.max(0.0);
    }
    let mass: f64 = out.iter().sum::<f64>() * vol;
    if !(mass > 0.0) {
        return Err(invalid(
            "smoothed density has vanishing mass; bandwidth too small for this grid",
        ));
    }
    for v in &mut out {
        *v /= mass;
    }
    GridDensity::new(grid, out)
}

/// Silverman's rule of thumb:
/// `(4 / (d + 2))^{1/(d+4)} * sigma * n^{-1/(d+4)}`.
pub fn bandwidth_rule(n: usize, dim: usize, sigma: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("bandwidth rule needs n >= 2, got {n}")));
    }
    if dim != 1 && dim != 2 {
        return Err(invalid(format!("dimension must be 1 or 2, got {dim}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    let d = dim as f64;
    Ok((4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * sigma * (n as f64).powf(-1.0 / (d + 4.0)))
}

/// Unbiased sample standard deviation of one coordinate.
pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(invalid("sample standard deviation needs n >= 2"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok((ss / (n - 1.0)).sqrt())
}

/// `L^1` distance between two densities on the same grid.
pub fn l1_distance(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    f.l1_distance(g)
}
