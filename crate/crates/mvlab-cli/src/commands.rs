//! Implementations of the single-purpose subcommands. Each one hashes its
//! job config, runs inside a fresh run directory, stores its artifacts, and
//! finishes with a manifest.

use std::path::Path;

use mvlab::density::{bandwidth_rule, histogram, kde, sample_std};
use mvlab::io::{read_grid_density, read_path_record, write_grid_density, DensityProvenance};
use mvlab::linearize::run_linearization;
use mvlab::malliavin::{
    inverse_moment_estimate, lower_bound_check, malliavin_sample, simulate_drift_path,
};
use mvlab::regularity::{
    besov_seminorm, block_norms, check_edge_decay, delta_power, kink_statistic, lp_decompose,
    max_level, regularity_index, BlockNorm, Exponent, KinkStat, RegularityReport, SeminormEntry,
};
use mvlab::simulate::{simulate, simulate_plain, DriftSpec, PathRecord, Snapshot};
use mvlab::{GridDensity, GridFunction, GridSpec};
use serde::Serialize;

use crate::artifacts::{config_hash, fint, fnum, ResourceCaps, RunContext, RunManifest};
use crate::configs::{
    named_drift, DensityJob, LinearizeJob, MalliavinJob, OracleJob, RegularityJob, SimulateJob,
};
use crate::{CliError, CliResult};

fn context_for<T: Serialize>(out_root: &Path, label: &str, job: &T, seed: u64) -> CliResult<RunContext> {
    let hash = config_hash(job)?;
    RunContext::create(out_root, label, hash, seed, ResourceCaps::default())
}

/// `simulate`: run the particle system and store the path record.
pub fn cmd_simulate(job: &SimulateJob, out_root: &Path) -> CliResult<RunManifest> {
    job.validate()?;
    let mut ctx = context_for(out_root, "simulate", job, job.run.seed)?;
    let record = match &job.run.drift {
        DriftSpec::MeanField { .. } => simulate(&job.run, &job.initial)?,
        DriftSpec::External { name } => {
            let drift = named_drift(name).expect("validated");
            simulate_plain(drift, &job.run, &job.initial)?
        }
    };
    let stem = ctx.stem("paths");
    mvlab::io::write_path_record(&stem, &record)?;
    ctx.json("run.json", job)?;
    let manifest = ctx.finish("simulate", "ok")?;
    println!(
        "simulate: {} particles, {} snapshots -> {}",
        record.config.n_particles,
        record.snapshots.len(),
        stem.display()
    );
    Ok(manifest)
}

/// Pull one snapshot out of a stored path record.
fn load_snapshot(record: &PathRecord, time: f64) -> CliResult<&Snapshot> {
    record.snapshot_at(time).ok_or_else(|| {
        CliError::Config(format!(
            "no snapshot at t = {time}; stored times: {:?}",
            record.snapshots.iter().map(|s| s.time).collect::<Vec<_>>()
        ))
    })
}

/// `density`: estimate a density from a stored snapshot.
pub fn cmd_density(job: &DensityJob, out_root: &Path) -> CliResult<RunManifest> {
    job.validate()?;
    let record = read_path_record(&job.input)?;
    let mut ctx = context_for(out_root, "density", job, record.config.seed)?;
    let snapshot = load_snapshot(&record, job.time)?;
    let grid = GridSpec::new(job.half_width, job.cells, record.config.dim)?;
    let bandwidth = match (job.bandwidth, job.silverman_factor) {
        (Some(b), _) => Some(b),
        (None, Some(factor)) => {
            let xs: Vec<f64> = snapshot.positions.iter().map(|p| p[0]).collect();
            let sigma = sample_std(&xs)?;
            Some(bandwidth_rule(snapshot.positions.len(), record.config.dim, sigma)? * factor)
        }
        (None, None) => None,
    };
    let density = match bandwidth {
        Some(b) => kde(&snapshot.positions, grid, b)?,
        None => histogram(&snapshot.positions, grid)?,
    };
    let stem = ctx.stem("density");
    let provenance = DensityProvenance {
        source: format!("{} @ t={}", job.input.display(), job.time),
        bandwidth,
    };
    write_grid_density(&stem, &density, provenance)?;
    ctx.json("job.json", job)?;
    let manifest = ctx.finish("density", "ok")?;
    println!(
        "density: {} -> {} ({})",
        job.input.display(),
        stem.display(),
        match bandwidth {
            Some(b) => format!("kde, bandwidth {b:.6}"),
            None => "histogram".to_string(),
        }
    );
    Ok(manifest)
}

/// Per-level seminorm value `2^{sn} ‖Δ^m_{2^{-n}} f‖_p`, averaged over axis
/// directions. The stored densities decay at the box edge (enforced below),
/// so the zero-extended norm matches the windowed one to rounding.
fn level_value(f: &GridFunction, n: u32, s: f64, m: u32, p: Exponent) -> CliResult<f64> {
    let h = 2.0_f64.powi(-(n as i32));
    let mut dirs = vec![[h, 0.0]];
    if f.grid.dim == 2 {
        dirs.push([0.0, h]);
    }
    let mut acc = 0.0;
    for dir in &dirs {
        let d = delta_power(f, *dir, m)?;
        let norm = match p {
            Exponent::One => d.l1_norm(),
            Exponent::Inf => d.linf_norm(),
        };
        acc += norm;
    }
    Ok(2.0_f64.powf(s * n as f64) * acc / dirs.len() as f64)
}

/// `regularity`: full diagnostic report for a stored density.
pub fn cmd_regularity(job: &RegularityJob, out_root: &Path) -> CliResult<RunManifest> {
    job.validate()?;
    let (density, sidecar) = read_grid_density(&job.input)?;
    let mut ctx = context_for(out_root, "regularity", job, 0)?;
    let f = density.as_function();
    check_edge_decay(&f)?;
    let levels = max_level(&f.grid)?;
    let blocks = lp_decompose(&f, levels)?;
    let norms = block_norms(&blocks, job.p);
    let fitted = regularity_index(&blocks, job.p).ok();
    let level_list: Vec<u32> = (0..=levels).collect();
    let seminorm = besov_seminorm(&f, job.p, Exponent::Inf, job.s, job.m, &level_list)?;

    let mut csv = ctx.csv("blocks.csv", &["n", "lp_norm", "level_value"])?;
    let mut level_values = Vec::new();
    for (n, norm) in norms.iter().enumerate() {
        let lv = level_value(&f, n as u32, job.s, job.m, job.p)?;
        level_values.push(lv);
        csv.row([fint(n as u64), fnum(*norm), fnum(lv)])?;
    }
    csv.finish()?;

    let mut kinks = Vec::new();
    for &x0 in &job.kink_locations {
        kinks.push(KinkStat {
            location: x0,
            jump: kink_statistic(&f, x0, &job.kink_scales)?,
        });
    }
    let report = RegularityReport {
        seminorms: vec![SeminormEntry {
            p: job.p,
            q: Exponent::Inf,
            s: job.s,
            m: job.m,
            value: seminorm,
        }],
        lp_blocks: norms
            .iter()
            .enumerate()
            .map(|(n, &lp_norm)| BlockNorm { n: n as u32, lp_norm })
            .collect(),
        fitted_index: fitted.clone(),
        kink_stats: kinks,
    };
    ctx.json("report.json", &report)?;
    ctx.json("source.json", &sidecar)?;
    let manifest = ctx.finish("regularity", "ok")?;
    match &fitted {
        Some(fit) => println!(
            "regularity: index {:.3}{} over {} blocks",
            fit.index,
            if fit.capped { " (capped)" } else { "" },
            norms.len()
        ),
        None => println!("regularity: no index fit ({} blocks)", norms.len()),
    }
    Ok(manifest)
}

/// `oracle`: materialize a closed-form density, optionally comparing a
/// stored estimate against it.
pub fn cmd_oracle(job: &OracleJob, out_root: &Path) -> CliResult<RunManifest> {
    job.validate()?;
    let mut ctx = context_for(out_root, "oracle", job, 0)?;
    let grid = GridSpec::new(job.half_width, job.cells, 1)?;
    let oracle: GridDensity = job.density.on_grid(grid)?;
    let stem = ctx.stem("oracle");
    write_grid_density(
        &stem,
        &oracle,
        DensityProvenance {
            source: format!("closed form {:?}", job.density),
            bandwidth: None,
        },
    )?;
    let mut message = format!("oracle: wrote {}", stem.display());
    if let Some(compare) = &job.compare {
        let (estimate, _) = read_grid_density(compare)?;
        let l1 = estimate.l1_distance(&oracle)?;
        let mut csv = ctx.csv("compare.csv", &["l1_distance"])?;
        csv.row([fnum(l1)])?;
        csv.finish()?;
        message = format!("{message}; L1 distance {l1:.5}");
    }
    ctx.json("job.json", job)?;
    let manifest = ctx.finish("oracle", "ok")?;
    println!("{message}");
    Ok(manifest)
}

/// `linearize`: anchored-expansion error ladder for one order.
pub fn cmd_linearize(job: &LinearizeJob, out_root: &Path) -> CliResult<RunManifest> {
    job.validate()?;
    let mut ctx = context_for(out_root, "linearize", job, job.seed)?;
    let result = run_linearization(job.order, &job.drift, job.t, &job.epsilons, job.samples, job.seed)?;
    let mut csv = ctx.csv("ae.csv", &["epsilon", "ae_mean", "ae_stderr"])?;
    for ((eps, ae), se) in result
        .epsilons
        .iter()
        .zip(&result.ae_values)
        .zip(&result.ae_stderr)
    {
        csv.row([fnum(*eps), fnum(*ae), fnum(*se)])?;
    }
    csv.finish()?;
    ctx.json("result.json", &result)?;
    let manifest = ctx.finish("linearize", "ok")?;
    println!(
        "linearize: order {} slope {:.3} ± {:.3}",
        result.order, result.fitted_slope, result.slope_stderr
    );
    Ok(manifest)
}

/// `malliavin`: batch of Malliavin matrices, inverse moments, and the
/// optional small-ball table.
pub fn cmd_malliavin(job: &MalliavinJob, out_root: &Path) -> CliResult<RunManifest> {
    job.validate()?;
    let mut ctx = context_for(out_root, "malliavin", job, job.seed)?;
    let mut csv = ctx.csv("batch.csv", &["sample_id", "det_gamma"])?;
    for i in 0..job.samples {
        let path = simulate_drift_path(&job.drift, job.t, job.dt, job.seed, i)?;
        let sample = malliavin_sample(&path, &job.drift)?;
        csv.row([fint(i), fnum(sample.det_gamma)])?;
    }
    csv.finish()?;
    let estimate = inverse_moment_estimate(&job.drift, job.t, job.dt, job.p, job.samples, job.seed)?;
    let lower_bound = match &job.lower_bound {
        Some(spec) => {
            let report = lower_bound_check(
                &job.drift,
                job.t,
                job.dt,
                spec.delta,
                &spec.epsilons,
                job.samples,
                job.seed,
            )?;
            let mut csv = ctx.csv("lower_bound.csv", &["epsilon", "empirical", "bound_shape"])?;
            for row in &report.rows {
                csv.row([
                    fnum(row.epsilon),
                    fnum(row.empirical),
                    row.bound_shape.map(fnum).unwrap_or_default(),
                ])?;
            }
            csv.finish()?;
            Some(report)
        }
        None => None,
    };
    #[derive(Serialize)]
    struct Summary<'a> {
        estimate: &'a mvlab::malliavin::InverseMomentEstimate,
        lower_bound: &'a Option<mvlab::malliavin::LowerBoundReport>,
    }
    ctx.json(
        "summary.json",
        &Summary {
            estimate: &estimate,
            lower_bound: &lower_bound,
        },
    )?;
    let manifest = ctx.finish("malliavin", "ok")?;
    println!(
        "malliavin: E[(det gamma)^-{}] = {:.5} ({})",
        job.p,
        estimate.mean,
        if estimate.stable { "stable" } else { "halves disagree" }
    );
    Ok(manifest)
}
