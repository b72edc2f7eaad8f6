//! FFT-accelerated lattice convolution and cloud-in-cell particle↔grid
//! transfer, shared by the mean-field drift backend and grid-based density
//! estimators.
//!
//! The convolution is *linear* (zero-padded to twice the grid size per axis),
//! with the stencil sampled on the cell-center difference lattice
//! `{k·w : −M < k < M}` — differences of cell centers are exact multiples of
//! the cell width, so for charges sitting exactly on centers the engine
//! reproduces the direct pairwise sum to rounding error.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;

/// Cloud-in-cell weights for one axis: cell index of the left neighbor and
/// the fractional weight assigned to the right neighbor. Out-of-range
/// neighbors are clamped to the boundary cell (mass-preserving).
#[inline]
fn cic_axis(grid: &GridSpec, x: f64) -> (isize, f64) {
    let w = grid.cell_width();
    let u = (x + grid.half_width) / w - 0.5;
    let i0 = u.floor();
    (i0 as isize, u - i0)
}

#[inline]
fn clamp_cell(i: isize, m: usize) -> usize {
    i.clamp(0, m as isize - 1) as usize
}

/// Deposit unit charges at the particle positions onto the grid with
/// cloud-in-cell (linear) weights. Serial over particles, so the result is
/// independent of thread count. `time` is only used in the escape diagnostic.
pub fn cic_deposit(grid: &GridSpec, positions: &[[f64; 2]], time: f64) -> Result<Vec<f64>> {
    let m = grid.cells;
    let mut charges = vec![0.0; grid.len()];
    for (p, x) in positions.iter().enumerate() {
        if !grid.contains(&x[..grid.dim]) {
            let worst = if grid.dim == 2 && x[1].abs() > x[0].abs() {
                x[1]
            } else {
                x[0]
            };
            return Err(Error::DomainEscape {
                particle: p,
                time,
                position: worst,
            });
        }
        let (i0, fx) = cic_axis(grid, x[0]);
        match grid.dim {
            1 => {
                charges[clamp_cell(i0, m)] += 1.0 - fx;
                charges[clamp_cell(i0 + 1, m)] += fx;
            }
            _ => {
                let (j0, fy) = cic_axis(grid, x[1]);
                let (ia, ib) = (clamp_cell(i0, m), clamp_cell(i0 + 1, m));
                let (ja, jb) = (clamp_cell(j0, m), clamp_cell(j0 + 1, m));
                charges[ia * m + ja] += (1.0 - fx) * (1.0 - fy);
                charges[ia * m + jb] += (1.0 - fx) * fy;
                charges[ib * m + ja] += fx * (1.0 - fy);
                charges[ib * m + jb] += fx * fy;
            }
        }
    }
    Ok(charges)
}

/// Read a gridded field back at a particle position with the same
/// cloud-in-cell weights used by [`cic_deposit`].
#[inline]
pub fn cic_read(grid: &GridSpec, values: &[f64], x: [f64; 2]) -> f64 {
    let m = grid.cells;
    let (i0, fx) = cic_axis(grid, x[0]);
    match grid.dim {
        1 => {
            (1.0 - fx) * values[clamp_cell(i0, m)] + fx * values[clamp_cell(i0 + 1, m)]
        }
        _ => {
            let (j0, fy) = cic_axis(grid, x[1]);
            let (ia, ib) = (clamp_cell(i0, m), clamp_cell(i0 + 1, m));
            let (ja, jb) = (clamp_cell(j0, m), clamp_cell(j0 + 1, m));
            (1.0 - fx) * ((1.0 - fy) * values[ia * m + ja] + fy * values[ia * m + jb])
                + fx * ((1.0 - fy) * values[ib * m + ja] + fy * values[ib * m + jb])
        }
    }
}

/// A fixed stencil on a fixed grid, ready to convolve with arbitrary charge
/// vectors. The stencil spectrum is computed once at construction; each
/// `convolve` costs one forward and `n_components` inverse transforms.
pub struct ConvolutionEngine {
    grid: GridSpec,
    pad: usize,
    /// One padded stencil spectrum per output component.
    spectra: Vec<Vec<Complex<f64>>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl ConvolutionEngine {
    /// Build an engine from per-component stencil functions evaluated on the
    /// offset lattice. `stencil(component, offset)` receives offsets with
    /// coordinates `k·w`, `|k| < cells`.
    pub fn from_stencil(
        grid: GridSpec,
        n_components: usize,
        stencil: impl Fn(usize, [f64; 2]) -> f64,
    ) -> Result<Self> {
        if n_components == 0 {
            return Err(invalid("convolution engine needs at least one component"));
        }
        let m = grid.cells;
        let pad = 2 * m;
        let w = grid.cell_width();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(pad);
        let inv = planner.plan_fft_inverse(pad);

        let plen = if grid.dim == 1 { pad } else { pad * pad };
        let mut spectra = Vec::with_capacity(n_components);
        for c in 0..n_components {
            let mut buf = vec![Complex::new(0.0, 0.0); plen];
            match grid.dim {
                1 => {
                    for k in -(m as isize - 1)..m as isize {
                        let idx = k.rem_euclid(pad as isize) as usize;
                        buf[idx] = Complex::new(stencil(c, [k as f64 * w, 0.0]), 0.0);
                    }
                    fwd.process(&mut buf);
                }
                _ => {
                    for kx in -(m as isize - 1)..m as isize {
                        let ix = kx.rem_euclid(pad as isize) as usize;
                        for ky in -(m as isize - 1)..m as isize {
                            let iy = ky.rem_euclid(pad as isize) as usize;
                            buf[ix * pad + iy] =
                                Complex::new(stencil(c, [kx as f64 * w, ky as f64 * w]), 0.0);
                        }
                    }
                    fft2(&mut buf, pad, &fwd);
                }
            }
            spectra.push(buf);
        }
        Ok(ConvolutionEngine {
            grid,
            pad,
            spectra,
            fwd,
            inv,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Linear convolution of the stencil with a charge vector laid out like a
    /// grid-function value buffer. Returns one output buffer per component:
    /// `out[c][i] = Σ_j stencil_c(x_i − x_j) · charges[j]`.
    pub fn convolve(&self, charges: &[f64]) -> Result<Vec<Vec<f64>>> {
        if charges.len() != self.grid.len() {
            return Err(invalid(format!(
                "charge buffer has {} entries, grid has {} cells",
                charges.len(),
                self.grid.len()
            )));
        }
        let m = self.grid.cells;
        let pad = self.pad;
        let plen = if self.grid.dim == 1 { pad } else { pad * pad };

        let mut qhat = vec![Complex::new(0.0, 0.0); plen];
        match self.grid.dim {
            1 => {
                for (i, &q) in charges.iter().enumerate() {
                    qhat[i] = Complex::new(q, 0.0);
                }
                self.fwd.process(&mut qhat);
            }
            _ => {
                for ix in 0..m {
                    for iy in 0..m {
                        qhat[ix * pad + iy] = Complex::new(charges[ix * m + iy], 0.0);
                    }
                }
                fft2(&mut qhat, pad, &self.fwd);
            }
        }

        let scale = 1.0 / plen as f64;
        let mut out = Vec::with_capacity(self.spectra.len());
        for spectrum in &self.spectra {
            let mut buf: Vec<Complex<f64>> =
                qhat.iter().zip(spectrum).map(|(a, b)| a * b).collect();
            match self.grid.dim {
                1 => {
                    self.inv.process(&mut buf);
                    out.push((0..m).map(|i| buf[i].re * scale).collect());
                }
                _ => {
                    fft2(&mut buf, pad, &self.inv);
                    let mut vals = Vec::with_capacity(m * m);
                    for ix in 0..m {
                        for iy in 0..m {
                            vals.push(buf[ix * pad + iy].re * scale);
                        }
                    }
                    out.push(vals);
                }
            }
        }
        Ok(out)
    }
}

/// Square 2-d FFT: transform rows, transpose, transform rows, transpose back.
fn fft2(data: &mut [Complex<f64>], n: usize, fft: &Arc<dyn Fft<f64>>) {
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    transpose_square(data, n);
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    transpose_square(data, n);
}

fn transpose_square(data: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
