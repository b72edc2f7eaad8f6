//! Persistence: binary flat payloads with JSON sidecars.
//!
//! A stored object is a pair of files sharing one stem: `<stem>.bin` holds
//! the raw values as little-endian 64-bit floats, `<stem>.json` holds the
//! sidecar (shape, provenance, format version). Path records store their
//! snapshots row-major `N × dim`, concatenated in time order; grid densities
//! store their cell values in grid order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{GridDensity, GridSpec};
use crate::simulate::{PathRecord, SimConfig, Snapshot};

/// Version stamp written into every sidecar; readers reject other versions.
pub const FORMAT_VERSION: u32 = 1;

/// The `(sidecar, payload)` file pair for a stem.
pub fn file_pair(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

fn write_f64s<'a>(path: &Path, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() != expected * 8 {
        return Err(invalid(format!(
            "payload {} holds {} bytes, expected {} ({} values of 8 bytes)",
            path.display(),
            bytes.len(),
            expected * 8,
            expected
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn check_version(found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(invalid(format!(
            "sidecar format version {found} is not the supported version {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

/// Sidecar of a stored path record: the full config echo plus the shape
/// needed to slice the flat payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSidecar {
    pub format_version: u32,
    pub config: SimConfig,
    pub seed: u64,
    /// Snapshot times actually recorded, in payload order.
    pub times: Vec<f64>,
    pub n_particles: usize,
    pub dim: usize,
}

/// Write a path record as `<stem>.bin` + `<stem>.json`. Returns the two
/// paths written (sidecar first). Only the recorded snapshots are persisted;
/// the per-run noise totals are a run-time diagnostic and are recomputed,
/// not stored.
pub fn write_path_record(stem: &Path, record: &PathRecord) -> Result<[PathBuf; 2]> {
    let (sidecar_path, bin_path) = file_pair(stem);
    let dim = record.config.dim;
    let sidecar = PathSidecar {
        format_version: FORMAT_VERSION,
        config: record.config.clone(),
        seed: record.config.seed,
        times: record.snapshots.iter().map(|s| s.time).collect(),
        n_particles: record.config.n_particles,
        dim,
    };
    write_f64s(
        &bin_path,
        record
            .snapshots
            .iter()
            .flat_map(|s| s.positions.iter().flat_map(|p| &p[..dim])),
    )?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(&sidecar_path)?), &sidecar)?;
    Ok([sidecar_path, bin_path])
}

/// Read a path record back from its file pair. The reconstructed record has
/// empty noise totals (they are not part of the stored format).
pub fn read_path_record(stem: &Path) -> Result<PathRecord> {
    let (sidecar_path, bin_path) = file_pair(stem);
    let sidecar: PathSidecar =
        serde_json::from_reader(BufReader::new(File::open(&sidecar_path)?))?;
    check_version(sidecar.format_version)?;
    sidecar.config.validate()?;
    let (n, dim) = (sidecar.n_particles, sidecar.dim);
    let flat = read_f64s(&bin_path, sidecar.times.len() * n * dim)?;
    let snapshots = sidecar
        .times
        .iter()
        .enumerate()
        .map(|(k, &time)| {
            let slice = &flat[k * n * dim..(k + 1) * n * dim];
            let positions = slice
                .chunks_exact(dim)
                .map(|row| {
                    let mut p = [0.0; 2];
                    p[..dim].copy_from_slice(row);
                    p
                })
                .collect();
            Snapshot { time, positions }
        })
        .collect();
    Ok(PathRecord {
        config: sidecar.config,
        snapshots,
        noise_totals: Vec::new(),
    })
}

/// Where a stored density came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityProvenance {
    /// Identifier of the source data (snapshot stem and time, oracle name, …).
    pub source: String,
    /// KDE bandwidth, absent for a raw histogram.
    pub bandwidth: Option<f64>,
}

/// Sidecar of a stored grid density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySidecar {
    pub format_version: u32,
    pub half_width: f64,
    pub cells: usize,
    pub dim: usize,
    pub provenance: DensityProvenance,
}

/// Write a grid density as `<stem>.bin` + `<stem>.json`; returns the two
/// paths written (sidecar first).
pub fn write_grid_density(
    stem: &Path,
    density: &GridDensity,
    provenance: DensityProvenance,
) -> Result<[PathBuf; 2]> {
    let (sidecar_path, bin_path) = file_pair(stem);
    let f = density.as_function();
    let grid = f.grid;
    let sidecar = DensitySidecar {
        format_version: FORMAT_VERSION,
        half_width: grid.half_width,
        cells: grid.cells,
        dim: grid.dim,
        provenance,
    };
    write_f64s(&bin_path, f.values.iter())?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(&sidecar_path)?), &sidecar)?;
    Ok([sidecar_path, bin_path])
}

/// Read a grid density back from its file pair.
pub fn read_grid_density(stem: &Path) -> Result<(GridDensity, DensitySidecar)> {
    let (sidecar_path, bin_path) = file_pair(stem);
    let sidecar: DensitySidecar =
        serde_json::from_reader(BufReader::new(File::open(&sidecar_path)?))?;
    check_version(sidecar.format_version)?;
    let grid = GridSpec::new(sidecar.half_width, sidecar.cells, sidecar.dim)?;
    let values = read_f64s(&bin_path, grid.len())?;
    Ok((GridDensity::new(grid, values)?, sidecar))
}
