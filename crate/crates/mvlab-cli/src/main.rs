//! `mvlab` — command-line driver for the interacting-diffusion laboratory.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use mvlab_cli::artifacts::{output_root, RunManifest};
use mvlab_cli::commands::{
    cmd_density, cmd_linearize, cmd_malliavin, cmd_oracle, cmd_regularity, cmd_simulate,
};
use mvlab_cli::configs::{
    load_config, DensityJob, ExperimentConfig, LinearizeJob, MalliavinJob, OracleJob,
    RegularityJob, SimulateJob,
};
use mvlab_cli::scenarios::{run_experiment, validate_experiment, SCENARIOS};
use mvlab_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "mvlab",
    version,
    about = "Particle simulations and density diagnostics for interacting diffusions",
    propagate_version = true
)]
struct Cli {
    /// Output root; overrides the MVLAB_OUT environment variable
    /// (default "mvlab-out").
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a particle system (interacting or plain drift).
    Simulate {
        /// JSON job description; omitted means the built-in default job.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate a density (histogram or KDE) from a stored snapshot.
    Density {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Run regularity diagnostics on a stored density.
    Regularity {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Evaluate a closed-form density, optionally comparing an estimate.
    Oracle {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Fit the anchored-expansion error ladder for a scalar drift.
    Linearize {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample Malliavin covariances and inverse moments for a scalar drift.
    Malliavin {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a named experiment scenario end to end.
    Experiment {
        /// Scenario name with default parameters (see --list).
        #[arg(long, conflicts_with = "config")]
        scenario: Option<String>,
        /// Full experiment config (scenario, parameters, seed, caps).
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// List known scenarios with their claims and default parameters.
        #[arg(long)]
        list: bool,
    },
    /// Check a JSON config against its schema without running anything.
    Validate {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Which schema the file should satisfy.
        #[arg(long, value_enum)]
        kind: ConfigKind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConfigKind {
    Simulate,
    Density,
    Regularity,
    Oracle,
    Linearize,
    Malliavin,
    Experiment,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let out_root = output_root(cli.out);
    match cli.command {
        Command::Simulate { config, seed } => {
            let mut job: SimulateJob = match &config {
                Some(path) => load_config(path)?,
                None => SimulateJob::default(),
            };
            if let Some(s) = seed {
                job.run.seed = s;
            }
            let manifest = cmd_simulate(&job, &out_root)?;
            report_dir(&out_root, &manifest);
        }
        Command::Density { config } => {
            let job: DensityJob = load_config(&config)?;
            let manifest = cmd_density(&job, &out_root)?;
            report_dir(&out_root, &manifest);
        }
        Command::Regularity { config } => {
            let job: RegularityJob = load_config(&config)?;
            let manifest = cmd_regularity(&job, &out_root)?;
            report_dir(&out_root, &manifest);
        }
        Command::Oracle { config } => {
            let job: OracleJob = load_config(&config)?;
            let manifest = cmd_oracle(&job, &out_root)?;
            report_dir(&out_root, &manifest);
        }
        Command::Linearize { config, seed } => {
            let mut job: LinearizeJob = load_config(&config)?;
            if let Some(s) = seed {
                job.seed = s;
            }
            let manifest = cmd_linearize(&job, &out_root)?;
            report_dir(&out_root, &manifest);
        }
        Command::Malliavin { config, seed } => {
            let mut job: MalliavinJob = load_config(&config)?;
            if let Some(s) = seed {
                job.seed = s;
            }
            let manifest = cmd_malliavin(&job, &out_root)?;
            report_dir(&out_root, &manifest);
        }
        Command::Experiment {
            scenario,
            config,
            seed,
            list,
        } => {
            if list {
                list_scenarios();
                return Ok(());
            }
            let mut cfg: ExperimentConfig = match (&config, scenario) {
                (Some(path), _) => load_config(path)?,
                (None, Some(name)) => ExperimentConfig {
                    scenario: name,
                    ..ExperimentConfig::default()
                },
                (None, None) => {
                    return Err(CliError::config(
                        "experiment needs --scenario NAME or --config FILE (or --list)",
                    ))
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (dir, _manifest, outcome) = run_experiment(&cfg, &out_root)?;
            println!("{}: {}", cfg.scenario, outcome.summary);
            println!("run directory: {}", dir.display());
            if !outcome.contrast_ok {
                return Err(CliError::Contrast(format!(
                    "scenario {:?} ran but its contrast gate failed: {}",
                    cfg.scenario, outcome.summary
                )));
            }
        }
        Command::Validate { config, kind } => {
            validate_config(&config, kind)?;
            println!(
                "ok: {} is a valid {} config",
                config.display(),
                kind_name(kind)
            );
        }
    }
    Ok(())
}

fn kind_name(kind: ConfigKind) -> &'static str {
    match kind {
        ConfigKind::Simulate => "simulate",
        ConfigKind::Density => "density",
        ConfigKind::Regularity => "regularity",
        ConfigKind::Oracle => "oracle",
        ConfigKind::Linearize => "linearize",
        ConfigKind::Malliavin => "malliavin",
        ConfigKind::Experiment => "experiment",
    }
}

fn validate_config(path: &Path, kind: ConfigKind) -> CliResult<()> {
    match kind {
        ConfigKind::Simulate => load_config::<SimulateJob>(path)?.validate(),
        ConfigKind::Density => load_config::<DensityJob>(path)?.validate(),
        ConfigKind::Regularity => load_config::<RegularityJob>(path)?.validate(),
        ConfigKind::Oracle => load_config::<OracleJob>(path)?.validate(),
        ConfigKind::Linearize => load_config::<LinearizeJob>(path)?.validate(),
        ConfigKind::Malliavin => load_config::<MalliavinJob>(path)?.validate(),
        ConfigKind::Experiment => validate_experiment(&load_config::<ExperimentConfig>(path)?),
    }
}

fn list_scenarios() {
    for def in SCENARIOS {
        println!("{:<12} {}", def.name, def.claim);
        let defaults =
            serde_json::to_string(&(def.defaults)()).unwrap_or_else(|_| "{}".to_string());
        println!("{:<12} defaults: {defaults}", "");
    }
}

/// Print the run directory of a finished command; the label convention is
/// `<command>-<hash prefix>` under the output root.
fn report_dir(out_root: &Path, manifest: &RunManifest) {
    let dir = out_root.join(format!(
        "{}-{}",
        manifest.command,
        &manifest.config_hash[..12]
    ));
    println!("run directory: {}", dir.display());
}
