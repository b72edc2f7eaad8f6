//! Uniform symmetric grids on `[-L, L]^d` and the gridded scalar / vector
//! fields the rest of the crate computes on.
//!
//! Every grid has `2^k` cells per axis; values live at cell centers
//! `-L + (i + 1/2) w` with `w = 2L / 2^k`. Dimensions 1 and 2 are supported,
//! with 2-d data stored row-major (`x` index slowest).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Description of a uniform symmetric grid: box `[-L, L]^d`, `2^k` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Box half-width `L`.
    pub half_width: f64,
    /// Cells per axis; always a power of two.
    pub cells: usize,
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, cells: usize, dim: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(invalid(format!(
                "grid half-width must be positive and finite, got {half_width}"
            )));
        }
        if cells < 2 || !cells.is_power_of_two() {
            return Err(invalid(format!(
                "cells per axis must be a power of two >= 2, got {cells}"
            )));
        }
        if dim != 1 && dim != 2 {
            return Err(invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(GridSpec {
            half_width,
            cells,
            dim,
        })
    }

    /// Cell width `2L / 2^k`, identical along every axis.
    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    /// Total number of cells, `cells^dim`.
    pub fn len(&self) -> usize {
        match self.dim {
            1 => self.cells,
            _ => self.cells * self.cells,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `d`-dimensional cell volume.
    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dim as i32)
    }

    /// Center coordinate of cell `i` along one axis.
    pub fn center(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.cell_width()
    }

    /// All axis center coordinates.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    /// Flat index for a 2-d cell (row-major, `ix` slow).
    pub fn index2(&self, ix: usize, iy: usize) -> usize {
        ix * self.cells + iy
    }

    /// Whether a point lies inside the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&c| c.abs() <= self.half_width)
    }

    fn check_dim(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "expected box [-{}, {}] with {} cells in d={}, got box [-{}, {}] with {} cells in d={}",
                self.half_width,
                self.half_width,
                self.cells,
                self.dim,
                other.half_width,
                other.half_width,
                other.cells,
                other.dim
            )))
        }
    }
}

/// A scalar function sampled at cell centers. No sign or mass constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: GridSpec,
    /// `grid.len()` values, row-major in 2-d.
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: GridSpec) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "value buffer has {} entries, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    /// Sample a closure at all cell centers (1-d grids).
    pub fn from_fn_1d(grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        if grid.dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: grid.dim,
            });
        }
        let values = (0..grid.cells).map(|i| f(grid.center(i))).collect();
        Ok(GridFunction { grid, values })
    }

    /// Sample a closure at all cell centers (2-d grids).
    pub fn from_fn_2d(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if grid.dim != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: grid.dim,
            });
        }
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.cells {
            let x = grid.center(ix);
            for iy in 0..grid.cells {
                values.push(f(x, grid.center(iy)));
            }
        }
        Ok(GridFunction { grid, values })
    }

    /// `L^1` norm by the Riemann sum `sum |f| * w^d`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `L^inf` norm (max absolute value over cells).
    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Riemann-sum integral `sum f * w^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Extract the centered sub-window `[-half_width, half_width]^d` as a new
    /// grid function. The sub-box must be cell-aligned: `half_width` must be an
    /// integer multiple of the cell width and the resulting cell count a power
    /// of two.
    pub fn crop(&self, half_width: f64) -> Result<GridFunction> {
        let w = self.grid.cell_width();
        let cells_f = 2.0 * half_width / w;
        let cells = cells_f.round() as usize;
        if (cells_f - cells as f64).abs() > 1e-9 * cells_f.max(1.0) {
            return Err(invalid(format!(
                "crop half-width {half_width} is not cell-aligned (cell width {w})"
            )));
        }
        if cells < 2 || !cells.is_power_of_two() || cells > self.grid.cells {
            return Err(invalid(format!(
                "crop would produce {cells} cells; need a power of two between 2 and {}",
                self.grid.cells
            )));
        }
        let sub = GridSpec::new(half_width, cells, self.grid.dim)?;
        let off = (self.grid.cells - cells) / 2;
        let mut values = Vec::with_capacity(sub.len());
        match self.grid.dim {
            1 => values.extend_from_slice(&self.values[off..off + cells]),
            _ => {
                for ix in 0..cells {
                    let row = (ix + off) * self.grid.cells + off;
                    values.extend_from_slice(&self.values[row..row + cells]);
                }
            }
        }
        Ok(GridFunction { grid: sub, values })
    }
}

/// A probability density sampled at cell centers: nonnegative values whose
/// Riemann sum is (approximately) one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "value buffer has {} entries, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(invalid("density values must be finite and nonnegative"));
        }
        Ok(GridDensity { grid, values })
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// View as a plain grid function (for regularity diagnostics).
    pub fn as_function(&self) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.clone(),
        }
    }

    /// `L^1` distance `sum |f - g| * w^d`; grids must match exactly.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        self.grid.check_dim(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume())
    }
}

/// A vector field sampled at cell centers, stored one component at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: GridSpec,
    /// `grid.dim` component buffers, each of length `grid.len()`.
    pub components: Vec<Vec<f64>>,
}

impl GridField {
    pub fn zeros(grid: GridSpec) -> Self {
        GridField {
            components: vec![vec![0.0; grid.len()]; grid.dim],
            grid,
        }
    }
}
