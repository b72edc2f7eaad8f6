//! Artifact plumbing shared by every subcommand: config hashing, run
//! directories, CSV files with a config-hash header, and the run manifest.
//!
//! Every run writes into its own directory `<out>/<label>-<hash prefix>`
//! derived from the configuration hash, so reruns of an identical config
//! land in the same place and produce byte-identical CSV files. The
//! manifest is written last, from the single writer thread, and lists every
//! artifact of the run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

/// Hex SHA-256 of the canonical JSON encoding of a config. Field order is
/// fixed by the struct definitions, so the hash is stable across runs.
pub fn config_hash<T: Serialize>(config: &T) -> CliResult<String> {
    let canonical = serde_json::to_string(config)
        .map_err(|e| CliError::Other(format!("cannot encode config: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Resource caps carried by experiment configs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResourceCaps {
    /// Upper bound on the particle count a scenario may request.
    pub max_particles: Option<u64>,
    /// Upper bound on wall-clock runtime in seconds, checked between stages.
    pub max_runtime_seconds: Option<f64>,
}

/// Manifest describing one completed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// File names relative to the run directory, excluding the manifest.
    pub artifacts: Vec<String>,
    pub library_version: String,
    /// Subcommand or scenario that produced the run.
    pub command: String,
    /// "ok" or "contrast-failed".
    pub outcome: String,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Deterministic float formatting for CSV cells: shortest representation
/// that round-trips (`{:?}`), identical on every run and thread count.
pub fn fnum(v: f64) -> String {
    format!("{v:?}")
}

pub fn fint(v: u64) -> String {
    v.to_string()
}

/// A CSV file under construction. The first line is a `# config_hash=<hex>`
/// comment tying the file to its run; the second is the header row.
pub struct CsvFile {
    out: BufWriter<File>,
    columns: usize,
    path: PathBuf,
}

impl CsvFile {
    fn create(path: PathBuf, hash: &str, columns: &[&str]) -> CliResult<Self> {
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "# config_hash={hash}")?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(CsvFile {
            out,
            columns: columns.len(),
            path,
        })
    }

    /// Append one row; the field count must match the header.
    pub fn row<I>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = String>,
    {
        let fields: Vec<String> = fields.into_iter().collect();
        if fields.len() != self.columns {
            return Err(CliError::Other(format!(
                "internal: {} fields for {} columns in {}",
                fields.len(),
                self.columns,
                self.path.display()
            )));
        }
        debug_assert!(fields.iter().all(|f| !f.contains(',') && !f.contains('\n')));
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Working state of one run: its directory, hash, caps, and the accumulated
/// artifact list. All outputs go through this context so the manifest ends
/// up complete.
pub struct RunContext {
    dir: PathBuf,
    config_hash: String,
    seed: u64,
    caps: ResourceCaps,
    started: Instant,
    started_ms: u64,
    artifacts: Vec<String>,
}

impl RunContext {
    /// Create (or reuse) the run directory `<out_root>/<label>-<hash[..12]>`.
    pub fn create(
        out_root: &Path,
        label: &str,
        config_hash: String,
        seed: u64,
        caps: ResourceCaps,
    ) -> CliResult<Self> {
        let dir = out_root.join(format!("{label}-{}", &config_hash[..12]));
        fs::create_dir_all(&dir)?;
        Ok(RunContext {
            dir,
            config_hash,
            seed,
            caps,
            started: Instant::now(),
            started_ms: unix_ms(),
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Open a CSV artifact with the given header columns.
    pub fn csv(&mut self, name: &str, columns: &[&str]) -> CliResult<CsvFile> {
        self.artifacts.push(name.to_string());
        CsvFile::create(self.dir.join(name), &self.config_hash, columns)
    }

    /// Write a JSON artifact.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.artifacts.push(name.to_string());
        let file = File::create(self.dir.join(name))?;
        serde_json::to_writer_pretty(BufWriter::new(file), value)
            .map_err(|e| CliError::Other(format!("cannot write {name}: {e}")))?;
        Ok(())
    }

    /// Reserve a binary+sidecar stem (`<name>.bin` / `<name>.json`) and
    /// register both files as artifacts.
    pub fn stem(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(format!("{name}.json"));
        self.artifacts.push(format!("{name}.bin"));
        self.dir.join(name)
    }

    /// Enforce the particle cap from the experiment config.
    pub fn check_particles(&self, requested: u64) -> CliResult<()> {
        if let Some(cap) = self.caps.max_particles {
            if requested > cap {
                return Err(CliError::Config(format!(
                    "scenario requests {requested} particles, above the configured cap {cap}"
                )));
            }
        }
        Ok(())
    }

    /// Enforce the runtime cap; call between stages.
    pub fn check_runtime(&self) -> CliResult<()> {
        if let Some(cap) = self.caps.max_runtime_seconds {
            let elapsed = self.started.elapsed().as_secs_f64();
            if elapsed > cap {
                return Err(CliError::Other(format!(
                    "runtime cap exceeded: {elapsed:.1} s elapsed, cap {cap} s"
                )));
            }
        }
        Ok(())
    }

    /// Write the manifest and return it. Consumes the context: nothing may
    /// be added after the manifest exists.
    pub fn finish(self, command: &str, outcome: &str) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            config_hash: self.config_hash,
            seed: self.seed,
            started_unix_ms: self.started_ms,
            finished_unix_ms: unix_ms(),
            artifacts: self.artifacts,
            library_version: mvlab::VERSION.to_string(),
            command: command.to_string(),
            outcome: outcome.to_string(),
        };
        let file = File::create(self.dir.join(MANIFEST_NAME))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &manifest)
            .map_err(|e| CliError::Other(format!("cannot write manifest: {e}")))?;
        Ok(manifest)
    }
}

/// Default output root: `--out` flag if given, else `MVLAB_OUT`, else
/// `./mvlab-out`.
pub fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("MVLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mvlab-out"))
}
