//! Euler-Maruyama simulation of (i) the interacting-particle approximation of
//! the McKean-Vlasov SDE `dX = (b * μ_t)(X) dt + dW` and (ii) plain SDEs
//! `dX = V(t, X) dt + dW`, driven by Brownian motion or a symmetric α-stable
//! process (1-d).
//!
//! The mean-field drift on particle `i` is the empirical convolution
//! `(1/N) Σ_j b(x_i − x_j)`, including the self term `j = i` (which
//! contributes `b(0) = 0` for the odd catalog kernels). It can be computed
//! either by the exact `O(N²)` pairwise sum or by a grid/FFT backend
//! (cloud-in-cell binning, zero-padded lattice convolution, cloud-in-cell
//! readback).
//!
//! Reproducibility: every random draw comes from a counter stream keyed by
//! `(seed, particle, step)`, so results are bit-identical across thread
//! counts; parallel phases only ever write disjoint per-particle slots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::{cic_deposit, cic_read, ConvolutionEngine};
use crate::grid::GridSpec;
use crate::kernels::{KernelClass, KernelSpec};
use crate::rng::{CounterRng, INIT_STEP};

/// Noise driving the SDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Driver {
    /// Standard Brownian motion; increments `√dt · ξ`.
    Brownian,
    /// Symmetric α-stable driver, `1 < alpha < 2`; increments `dt^{1/α} · S`.
    /// One-dimensional only.
    Stable { alpha: f64 },
    /// No noise at all — degenerate driver for deterministic tests.
    None,
}

/// Drift specification carried in the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DriftSpec {
    /// Mean-field convolution drift with an interaction kernel.
    MeanField { kernel: KernelClass },
    /// Externally supplied drift function, identified by name in configs;
    /// the actual function is passed to [`simulate_plain`].
    External { name: String },
}

/// How the mean-field drift is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Backend {
    /// Exact `O(N²)` pairwise sum.
    Direct,
    /// Cloud-in-cell binning on `[−L, L]^d` with `2^k` cells per axis and
    /// FFT lattice convolution.
    GridFft { half_width: f64, cells: usize },
}

/// Initial distribution `μ_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InitialLaw {
    /// Dirac mass at a point.
    Point { position: Vec<f64> },
    /// Isotropic Gaussian.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Uniform on `[−half_width, half_width]^d`.
    Uniform { half_width: f64 },
}

impl InitialLaw {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            InitialLaw::Point { position } => {
                if position.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: position.len(),
                    });
                }
            }
            InitialLaw::Gaussian { mean, std } => {
                if mean.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: mean.len(),
                    });
                }
                if !(*std > 0.0) {
                    return Err(invalid(format!("initial std must be > 0, got {std}")));
                }
            }
            InitialLaw::Uniform { half_width } => {
                if !(*half_width > 0.0) {
                    return Err(invalid(format!(
                        "initial half-width must be > 0, got {half_width}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut CounterRng, dim: usize) -> [f64; 2] {
        let mut x = [0.0; 2];
        match self {
            InitialLaw::Point { position } => x[..dim].copy_from_slice(position),
            InitialLaw::Gaussian { mean, std } => {
                let (a, b) = rng.normal_pair();
                x[0] = mean[0] + std * a;
                if dim == 2 {
                    x[1] = mean[1] + std * b;
                }
            }
            InitialLaw::Uniform { half_width } => {
                for c in x.iter_mut().take(dim) {
                    *c = (2.0 * rng.next_f64() - 1.0) * half_width;
                }
            }
        }
        x
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_particles: usize,
    pub dim: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub driver: Driver,
    pub drift: DriftSpec,
    pub backend: Backend,
    /// Sorted times at which positions are recorded; each must be an integer
    /// multiple of `dt` (to 1e−9 relative).
    pub snapshot_times: Vec<f64>,
}

/// Map a time to its step index, requiring alignment with the step grid.
fn step_index_for(time: f64, dt: f64) -> Result<u64> {
    let k = (time / dt).round();
    if k < 0.0 || (k * dt - time).abs() > 1e-9 * time.abs().max(1.0) {
        return Err(invalid(format!(
            "time {time} is not a nonnegative integer multiple of dt = {dt}"
        )));
    }
    Ok(k as u64)
}

impl SimConfig {
    pub fn n_steps(&self) -> Result<u64> {
        step_index_for(self.t_end, self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("n_particles must be ≥ 1"));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(invalid(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(invalid(format!(
                "t_end must be ≥ dt, got t_end = {} with dt = {}",
                self.t_end, self.dt
            )));
        }
        self.n_steps()?;
        for pair in self.snapshot_times.windows(2) {
            if pair[1] < pair[0] {
                return Err(invalid("snapshot times must be sorted ascending"));
            }
        }
        for &t in &self.snapshot_times {
            if t < 0.0 || t > self.t_end * (1.0 + 1e-12) {
                return Err(invalid(format!(
                    "snapshot time {t} outside [0, t_end = {}]",
                    self.t_end
                )));
            }
            step_index_for(t, self.dt)?;
        }
        match self.driver {
            Driver::Stable { alpha } => {
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(invalid(format!(
                        "stable index must lie in (1, 2), got {alpha}"
                    )));
                }
                if self.dim != 1 {
                    return Err(invalid("the stable driver requires dim = 1"));
                }
            }
            Driver::Brownian | Driver::None => {}
        }
        if let Backend::GridFft { half_width, cells } = self.backend {
            GridSpec::new(half_width, cells, self.dim)?;
        }
        if let DriftSpec::MeanField { kernel } = &self.drift {
            KernelSpec::new(kernel.clone(), self.dim)?;
        }
        Ok(())
    }

    fn snapshot_steps(&self) -> Vec<u64> {
        self.snapshot_times
            .iter()
            .map(|&t| step_index_for(t, self.dt).expect("validated"))
            .collect()
    }
}

/// The particle system at one instant. With counter-based streams the pair
/// `(seed, step)` *is* the per-particle RNG state.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub positions: Vec<[f64; 2]>,
    pub time: f64,
    /// Index of the next time step; also the RNG counter.
    pub step: u64,
    pub seed: u64,
    pub dim: usize,
}

impl ParticleEnsemble {
    /// Draw `n` particles from the initial law (counter streams at the
    /// reserved initialization step).
    pub fn init(config: &SimConfig, init: &InitialLaw) -> Result<Self> {
        config.validate()?;
        init.validate(config.dim)?;
        let positions = (0..config.n_particles)
            .map(|i| {
                let mut rng = CounterRng::at(config.seed, i as u64, INIT_STEP);
                init.sample(&mut rng, config.dim)
            })
            .collect();
        Ok(ParticleEnsemble {
            positions,
            time: 0.0,
            step: 0,
            seed: config.seed,
            dim: config.dim,
        })
    }
}

/// One recorded time slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub positions: Vec<[f64; 2]>,
}

/// Output of a simulation run: requested snapshots, per-particle accumulated
/// driver increments (for conservation tests), and the config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub config: SimConfig,
    pub snapshots: Vec<Snapshot>,
    pub noise_totals: Vec<[f64; 2]>,
}

impl PathRecord {
    /// Snapshot closest to the requested time (times are exact echoes, so an
    /// exact match is found when the time was requested).
    pub fn snapshot_at(&self, time: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.time - time).abs() <= 1e-12 * time.abs().max(1.0))
    }
}

/// Exact `O(N²)` mean-field drift: `drift_i = (1/N) Σ_j b(x_i − x_j)`,
/// self term included.
pub fn meanfield_drift_direct(
    positions: &[[f64; 2]],
    kernel: &KernelSpec,
) -> Result<Vec<[f64; 2]>> {
    if positions.is_empty() {
        return Err(invalid("mean-field drift needs at least one particle"));
    }
    let n_inv = 1.0 / positions.len() as f64;
    Ok(positions
        .par_iter()
        .map(|xi| {
            let mut acc = [0.0; 2];
            for xj in positions {
                let v = kernel.eval_point([xi[0] - xj[0], xi[1] - xj[1]]);
                acc[0] += v[0];
                acc[1] += v[1];
            }
            [acc[0] * n_inv, acc[1] * n_inv]
        })
        .collect())
}

/// Grid/FFT mean-field drift backend with a precomputed kernel stencil.
pub struct MeanFieldFft {
    engine: ConvolutionEngine,
    dim: usize,
}

impl MeanFieldFft {
    pub fn new(kernel: &KernelSpec, grid: GridSpec) -> Result<Self> {
        if kernel.dim != grid.dim {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim,
                got: grid.dim,
            });
        }
        let dim = grid.dim;
        let engine =
            ConvolutionEngine::from_stencil(grid, dim, |c, offset| kernel.eval_point(offset)[c])?;
        Ok(MeanFieldFft { engine, dim })
    }

    /// Drift for all particles; errors with a domain escape if any particle
    /// is outside the grid box.
    pub fn drift(&self, positions: &[[f64; 2]], time: f64) -> Result<Vec<[f64; 2]>> {
        if positions.is_empty() {
            return Err(invalid("mean-field drift needs at least one particle"));
        }
        let grid = self.engine.grid();
        let charges = cic_deposit(&grid, positions, time)?;
        let conv = self.engine.convolve(&charges)?;
        let n_inv = 1.0 / positions.len() as f64;
        let dim = self.dim;
        Ok(positions
            .par_iter()
            .map(|&x| {
                let mut d = [0.0; 2];
                for (c, conv_c) in conv.iter().enumerate().take(dim) {
                    d[c] = cic_read(&grid, conv_c, x) * n_inv;
                }
                d
            })
            .collect())
    }
}

/// One-shot convenience wrapper around [`MeanFieldFft`].
pub fn meanfield_drift_fft(
    positions: &[[f64; 2]],
    kernel: &KernelSpec,
    grid: GridSpec,
) -> Result<Vec<[f64; 2]>> {
    MeanFieldFft::new(kernel, grid)?.drift(positions, 0.0)
}

/// A scaled α-stable increment `dt^{1/α} · S` with `S` standard symmetric
/// α-stable.
pub fn sample_stable_increment(alpha: f64, dt: f64, rng: &mut CounterRng) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(invalid(format!("stable index must lie in (1, 2), got {alpha}")));
    }
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    Ok(rng.stable_standard(alpha) * dt.powf(1.0 / alpha))
}

fn driver_increment(driver: Driver, dt: f64, dim: usize, rng: &mut CounterRng) -> [f64; 2] {
    match driver {
        Driver::Brownian => {
            let (a, b) = rng.normal_pair();
            let s = dt.sqrt();
            [a * s, if dim == 2 { b * s } else { 0.0 }]
        }
        Driver::Stable { alpha } => [rng.stable_standard(alpha) * dt.powf(1.0 / alpha), 0.0],
        Driver::None => [0.0; 2],
    }
}

/// Advance the ensemble by one Euler step with the given per-particle drift
/// vectors, accumulating driver increments into `noise_totals`.
pub fn step(
    ensemble: &mut ParticleEnsemble,
    config: &SimConfig,
    drifts: &[[f64; 2]],
    noise_totals: &mut [[f64; 2]],
) -> Result<()> {
    let n = ensemble.positions.len();
    if drifts.len() != n || noise_totals.len() != n {
        return Err(invalid("drift/noise buffers must match the particle count"));
    }
    let dt = config.dt;
    let dim = ensemble.dim;
    let driver = config.driver;
    let seed = ensemble.seed;
    let k = ensemble.step;
    let new_time = ensemble.time + dt;
    ensemble
        .positions
        .par_iter_mut()
        .zip(noise_totals.par_iter_mut())
        .enumerate()
        .try_for_each(|(i, (x, tot))| {
            let mut rng = CounterRng::at(seed, i as u64, k);
            let inc = driver_increment(driver, dt, dim, &mut rng);
            for c in 0..dim {
                x[c] += drifts[i][c] * dt + inc[c];
                tot[c] += inc[c];
                if !x[c].is_finite() {
                    return Err(Error::Blowup {
                        particle: i,
                        time: new_time,
                    });
                }
            }
            Ok(())
        })?;
    ensemble.time = new_time;
    ensemble.step += 1;
    Ok(())
}

/// Run the interacting-particle simulation described by the config (drift
/// must be mean-field).
pub fn simulate(config: &SimConfig, init: &InitialLaw) -> Result<PathRecord> {
    config.validate()?;
    init.validate(config.dim)?;
    let kernel = match &config.drift {
        DriftSpec::MeanField { kernel } => KernelSpec::new(kernel.clone(), config.dim)?,
        DriftSpec::External { .. } => {
            return Err(invalid(
                "simulate requires a mean-field drift; use simulate_plain for external drifts",
            ))
        }
    };
    let fft = match config.backend {
        Backend::Direct => None,
        Backend::GridFft { half_width, cells } => Some(MeanFieldFft::new(
            &kernel,
            GridSpec::new(half_width, cells, config.dim)?,
        )?),
    };

    let n_steps = config.n_steps()?;
    let snap_steps = config.snapshot_steps();
    let mut ensemble = ParticleEnsemble::init(config, init)?;
    let mut noise_totals = vec![[0.0; 2]; config.n_particles];
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut pending = 0usize;

    let mut record = |step: u64, ens: &ParticleEnsemble, pending: &mut usize| {
        while *pending < snap_steps.len() && snap_steps[*pending] == step {
            snapshots.push(Snapshot {
                time: config.snapshot_times[*pending],
                positions: ens.positions.clone(),
            });
            *pending += 1;
        }
    };

    record(0, &ensemble, &mut pending);
    for k in 0..n_steps {
        let drifts = match &fft {
            None => meanfield_drift_direct(&ensemble.positions, &kernel)?,
            Some(backend) => backend.drift(&ensemble.positions, ensemble.time)?,
        };
        step(&mut ensemble, config, &drifts, &mut noise_totals)?;
        record(k + 1, &ensemble, &mut pending);
    }
    Ok(PathRecord {
        config: config.clone(),
        snapshots,
        noise_totals,
    })
}

/// Run independent Euler paths of the plain SDE `dX = V(t, X) dt + (noise)`
/// (drift spec must be external; the name is only echoed).
pub fn simulate_plain(
    drift: impl Fn(f64, [f64; 2]) -> [f64; 2] + Sync,
    config: &SimConfig,
    init: &InitialLaw,
) -> Result<PathRecord> {
    config.validate()?;
    init.validate(config.dim)?;
    if !matches!(config.drift, DriftSpec::External { .. }) {
        return Err(invalid(
            "simulate_plain requires an external drift; use simulate for mean-field kernels",
        ));
    }
    let n_steps = config.n_steps()?;
    let snap_steps = config.snapshot_steps();
    let dim = config.dim;
    let dt = config.dt;
    let seed = config.seed;
    let driver = config.driver;

    let rows: Result<Vec<(Vec<[f64; 2]>, [f64; 2])>> = (0..config.n_particles)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::at(seed, i as u64, INIT_STEP);
            let mut x = init.sample(&mut rng, dim);
            let mut tot = [0.0; 2];
            let mut snaps = Vec::with_capacity(snap_steps.len());
            let mut ptr = 0usize;
            while ptr < snap_steps.len() && snap_steps[ptr] == 0 {
                snaps.push(x);
                ptr += 1;
            }
            for k in 0..n_steps {
                let v = drift(k as f64 * dt, x);
                let mut rng = CounterRng::at(seed, i as u64, k);
                let inc = driver_increment(driver, dt, dim, &mut rng);
                for c in 0..dim {
                    x[c] += v[c] * dt + inc[c];
                    tot[c] += inc[c];
                    if !x[c].is_finite() {
                        return Err(Error::Blowup {
                            particle: i,
                            time: (k + 1) as f64 * dt,
                        });
                    }
                }
                while ptr < snap_steps.len() && snap_steps[ptr] == k + 1 {
                    snaps.push(x);
                    ptr += 1;
                }
            }
            Ok((snaps, tot))
        })
        .collect();
    let rows = rows?;

    let mut snapshots: Vec<Snapshot> = config
        .snapshot_times
        .iter()
        .map(|&t| Snapshot {
            time: t,
            positions: Vec::with_capacity(config.n_particles),
        })
        .collect();
    let mut noise_totals = Vec::with_capacity(config.n_particles);
    for (snaps, tot) in rows {
        for (slot, v) in snapshots.iter_mut().zip(snaps) {
            slot.positions.push(v);
        }
        noise_totals.push(tot);
    }
    Ok(PathRecord {
        config: config.clone(),
        snapshots,
        noise_totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::sign0;

    fn base_config(n: usize) -> SimConfig {
        SimConfig {
            n_particles: n,
            dim: 1,
            dt: 0.25,
            t_end: 1.0,
            seed: 17,
            driver: Driver::Brownian,
            drift: DriftSpec::MeanField {
                kernel: KernelClass::Sign,
            },
            backend: Backend::Direct,
            snapshot_times: vec![1.0],
        }
    }

    #[test]
    fn two_particle_sign_drifts() {
        let kernel = KernelSpec::new(KernelClass::Sign, 1).unwrap();
        let d = meanfield_drift_direct(&[[-1.0, 0.0], [1.0, 0.0]], &kernel).unwrap();
        assert_eq!(d[0][0], 0.5);
        assert_eq!(d[1][0], -0.5);
    }

    #[test]
    fn zero_kernel_gives_zero_drift() {
        let kernel = KernelSpec::new(KernelClass::Zero, 1).unwrap();
        let pos = [[0.3, 0.0], [-1.2, 0.0], [0.9, 0.0]];
        for d in meanfield_drift_direct(&pos, &kernel).unwrap() {
            assert_eq!(d[0], 0.0);
        }
    }

    #[test]
    fn collinear_middle_particle_has_zero_drift() {
        let kernel = KernelSpec::new(KernelClass::Holder { alpha: 0.5 }, 1).unwrap();
        let d =
            meanfield_drift_direct(&[[-0.7, 0.0], [0.1, 0.0], [0.9, 0.0]], &kernel).unwrap();
        assert_eq!(d[1][0], 0.0, "pairwise cancellation for odd kernels");
    }

    #[test]
    fn fft_backend_matches_direct_sum() {
        // Mollified sign kernel, particles uniform in [−1, 1].
        let kernel = KernelSpec::new(KernelClass::Sign, 1)
            .unwrap()
            .mollify(0.1)
            .unwrap();
        let n = 512;
        let positions: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let mut rng = CounterRng::at(99, i as u64, INIT_STEP);
                [2.0 * rng.next_f64() - 1.0, 0.0]
            })
            .collect();
        let direct = meanfield_drift_direct(&positions, &kernel).unwrap();
        let grid = GridSpec::new(4.0, 1 << 12, 1).unwrap();
        let fft = meanfield_drift_fft(&positions, &kernel, grid).unwrap();
        let max_dev = direct
            .iter()
            .zip(&fft)
            .map(|(a, b)| (a[0] - b[0]).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_dev < 1e-3, "max deviation {max_dev}");
    }

    #[test]
    fn fft_single_particle_drift_vanishes() {
        let kernel = KernelSpec::new(KernelClass::Sign, 1).unwrap();
        let grid = GridSpec::new(2.0, 256, 1).unwrap();
        let d = meanfield_drift_fft(&[[0.37, 0.0]], &kernel, grid).unwrap();
        assert!(d[0][0].abs() < 1e-12, "{}", d[0][0]);
    }

    #[test]
    fn one_brownian_step_unit_variance() {
        let mut config = base_config(100_000);
        config.dt = 1.0;
        config.drift = DriftSpec::MeanField {
            kernel: KernelClass::Zero,
        };
        let init = InitialLaw::Point {
            position: vec![0.0],
        };
        let mut ens = ParticleEnsemble::init(&config, &init).unwrap();
        let drifts = vec![[0.0; 2]; config.n_particles];
        let mut noise = vec![[0.0; 2]; config.n_particles];
        step(&mut ens, &config, &drifts, &mut noise).unwrap();
        let n = ens.positions.len() as f64;
        let mean = ens.positions.iter().map(|x| x[0]).sum::<f64>() / n;
        let var = ens.positions.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn constant_drift_without_noise_is_exact() {
        let mut config = base_config(4);
        config.driver = Driver::None;
        config.drift = DriftSpec::External {
            name: "constant".into(),
        };
        config.dt = 0.125;
        config.t_end = 0.125;
        config.snapshot_times = vec![0.125];
        let c = 0.7;
        let record = simulate_plain(
            |_, _| [c, 0.0],
            &config,
            &InitialLaw::Point {
                position: vec![0.0],
            },
        )
        .unwrap();
        for p in &record.snapshots[0].positions {
            assert_eq!(p[0], c * 0.125);
        }
    }

    #[test]
    fn identical_runs_across_thread_counts() {
        let config = SimConfig {
            n_particles: 300,
            dt: 0.05,
            t_end: 0.5,
            snapshot_times: vec![0.25, 0.5],
            ..base_config(300)
        };
        let init = InitialLaw::Gaussian {
            mean: vec![0.0],
            std: 1.0,
        };
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate(&config, &init).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.noise_totals, b.noise_totals);
    }

    #[test]
    fn pure_brownian_motion_variance_at_t1() {
        let mut config = base_config(10_000);
        config.drift = DriftSpec::MeanField {
            kernel: KernelClass::Zero,
        };
        let record = simulate(
            &config,
            &InitialLaw::Point {
                position: vec![0.0],
            },
        )
        .unwrap();
        let xs = &record.snapshots[0].positions;
        let n = xs.len() as f64;
        let var = xs.iter().map(|x| x[0] * x[0]).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn center_of_mass_is_conserved_for_odd_kernels() {
        let config = SimConfig {
            n_particles: 200,
            dt: 1e-3,
            t_end: 1.0,
            snapshot_times: vec![0.0, 1.0],
            ..base_config(200)
        };
        let init = InitialLaw::Gaussian {
            mean: vec![0.3],
            std: 0.5,
        };
        let record = simulate(&config, &init).unwrap();
        let mean = |xs: &[[f64; 2]]| xs.iter().map(|x| x[0]).sum::<f64>() / xs.len() as f64;
        let m0 = mean(&record.snapshots[0].positions);
        let m1 = mean(&record.snapshots[1].positions);
        let mn = mean(&record.noise_totals);
        assert!(
            (m1 - mn - m0).abs() < 1e-9,
            "drift residual {}",
            (m1 - mn - m0).abs()
        );
    }

    #[test]
    fn translation_equivariance() {
        let config = SimConfig {
            n_particles: 100,
            dt: 1e-3,
            t_end: 1.0,
            snapshot_times: vec![1.0],
            ..base_config(100)
        };
        let shift = 0.5;
        let a = simulate(
            &config,
            &InitialLaw::Gaussian {
                mean: vec![0.0],
                std: 0.4,
            },
        )
        .unwrap();
        let b = simulate(
            &config,
            &InitialLaw::Gaussian {
                mean: vec![shift],
                std: 0.4,
            },
        )
        .unwrap();
        let max_dev = a.snapshots[0]
            .positions
            .iter()
            .zip(&b.snapshots[0].positions)
            .map(|(x, y)| ((y[0] - x[0]) - shift).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_dev < 1e-9, "max deviation {max_dev}");
    }

    #[test]
    fn ou_stationary_variance() {
        let config = SimConfig {
            n_particles: 10_000,
            dt: 0.01,
            t_end: 5.0,
            snapshot_times: vec![5.0],
            drift: DriftSpec::External {
                name: "linear".into(),
            },
            ..base_config(10_000)
        };
        let record = simulate_plain(
            |_, x| [-x[0], 0.0],
            &config,
            &InitialLaw::Point {
                position: vec![0.0],
            },
        )
        .unwrap();
        let xs = &record.snapshots[0].positions;
        let var = xs.iter().map(|x| x[0] * x[0]).sum::<f64>() / xs.len() as f64;
        assert!((var - 0.5).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn plain_sign_sde_density_near_oracle() {
        use crate::density::histogram;
        use crate::oracle::OracleDensity;
        let config = SimConfig {
            n_particles: 20_000,
            dt: 1e-3,
            t_end: 1.0,
            snapshot_times: vec![1.0],
            drift: DriftSpec::External { name: "sign".into() },
            ..base_config(20_000)
        };
        let record = simulate_plain(
            |_, x| [-sign0(x[0]), 0.0],
            &config,
            &InitialLaw::Point {
                position: vec![0.0],
            },
        )
        .unwrap();
        let grid = GridSpec::new(6.0, 256, 1).unwrap();
        let est = histogram(&record.snapshots[0].positions, grid).unwrap();
        let oracle = OracleDensity::SignSde0 { t: 1.0 }.on_grid(grid).unwrap();
        let l1 = est.l1_distance(&oracle).unwrap();
        assert!(l1 < 0.05, "L1 distance {l1}");
    }

    #[test]
    fn stable_tail_slope() {
        let alpha = 1.5;
        let n = 1_000_000usize;
        let thresholds = [5.0, 8.9, 15.8, 28.1, 50.0];
        let mut counts = [0usize; 5];
        for i in 0..n {
            let mut rng = CounterRng::at(7, i as u64, 0);
            let s = sample_stable_increment(alpha, 1.0, &mut rng).unwrap().abs();
            for (k, &x) in thresholds.iter().enumerate() {
                if s > x {
                    counts[k] += 1;
                }
            }
        }
        // Least-squares slope of log P(|S| > x) against log x.
        let pts: Vec<(f64, f64)> = thresholds
            .iter()
            .zip(&counts)
            .map(|(&x, &c)| (x.ln(), (c as f64 / n as f64).ln()))
            .collect();
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        assert!((slope + alpha).abs() < 0.1, "tail slope {slope}");
    }

    #[test]
    fn stable_increment_self_similarity() {
        // Increments over 2·dt, rescaled by 2^{−1/α}, match increments over dt.
        let alpha = 1.5;
        let n = 100_000;
        let mut a: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = CounterRng::at(21, i as u64, 0);
                sample_stable_increment(alpha, 0.01, &mut rng).unwrap()
            })
            .collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = CounterRng::at(22, i as u64, 0);
                sample_stable_increment(alpha, 0.02, &mut rng).unwrap()
                    * 0.5_f64.powf(1.0 / alpha)
            })
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        // Two-sample Kolmogorov-Smirnov distance via the merged grid.
        let mut ks = 0.0_f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            ks = ks.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn blowup_is_reported() {
        let mut config = base_config(4);
        config.driver = Driver::None;
        config.drift = DriftSpec::External {
            name: "explosive".into(),
        };
        config.dt = 1.0;
        config.t_end = 8.0;
        config.snapshot_times = vec![];
        let err = simulate_plain(
            |_, x| [x[0] * x[0] * 1e150 + 1.0, 0.0],
            &config,
            &InitialLaw::Point {
                position: vec![1.0],
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Blowup { .. }), "{err:?}");
    }

    #[test]
    fn escape_is_reported_by_fft_backend() {
        let config = SimConfig {
            n_particles: 50,
            dt: 0.05,
            t_end: 5.0,
            backend: Backend::GridFft {
                half_width: 1.0,
                cells: 64,
            },
            drift: DriftSpec::MeanField {
                kernel: KernelClass::Zero,
            },
            snapshot_times: vec![],
            ..base_config(50)
        };
        // Pure diffusion leaves [−1, 1] quickly.
        let err = simulate(
            &config,
            &InitialLaw::Point {
                position: vec![0.0],
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::DomainEscape { .. }), "{err:?}");
    }

    #[test]
    fn snapshots_echo_requested_times() {
        let mut config = base_config(10);
        config.snapshot_times = vec![0.0, 0.5, 1.0];
        let record = simulate(
            &config,
            &InitialLaw::Point {
                position: vec![0.0],
            },
        )
        .unwrap();
        let times: Vec<f64> = record.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times, vec![0.0, 0.5, 1.0]);
        assert!(record.snapshot_at(0.5).is_some());
        assert_eq!(record.config, config);
    }

    #[test]
    fn invalid_configs_are_usage_errors() {
        let mut c = base_config(10);
        c.dt = 0.0;
        assert!(c.validate().unwrap_err().is_usage());

        let mut c = base_config(10);
        c.driver = Driver::Stable { alpha: 1.5 };
        c.dim = 2;
        assert!(c.validate().unwrap_err().is_usage());

        let mut c = base_config(10);
        c.driver = Driver::Stable { alpha: 2.5 };
        assert!(c.validate().unwrap_err().is_usage());

        let mut c = base_config(10);
        c.snapshot_times = vec![0.3];
        assert!(c.validate().unwrap_err().is_usage(), "misaligned snapshot");

        let mut c = base_config(10);
        c.t_end = 1.1;
        assert!(c.validate().unwrap_err().is_usage(), "t_end not on step grid");
    }
}
