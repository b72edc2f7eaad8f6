//! Acceptance suite: one test per headline claim of the laboratory.
//!
//! Each test prints a single `criterion NN: PASS/FAIL — <details>` line
//! (visible with `cargo test --test acceptance -- --nocapture`) and then
//! asserts the same condition, so a red criterion fails the build.
//!
//! Scenario-backed criteria drive the installed `mvlab` binary in a
//! subprocess, exercising the full pipeline (CLI → scenario → artifacts) and
//! reading the published CSVs back independently.  Operator-level criteria
//! call the library directly with pinned constants and tolerances.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mvlab::kernels::{KernelClass, KernelSpec};
use mvlab::linearize::{increment_scaling, pe_bound_check, run_linearization, DriftFn};
use mvlab::malliavin::{
    inverse_moment_estimate, malliavin_sample, picard_series, simulate_drift_path,
    variational_derivative,
};
use mvlab::oracle::standard_normal_pdf;
use mvlab::regularity::{
    besov_seminorm, delta_power, lp_decompose, max_level, regularity_index, Exponent, INDEX_CAP,
};
use mvlab::simulate::{
    meanfield_drift_direct, meanfield_drift_fft, simulate, Backend, DriftSpec, Driver, InitialLaw,
    SimConfig,
};
use mvlab::{GridFunction, GridSpec};

// ---------------------------------------------------------------------------
// Harness helpers

fn verdict(num: u32, label: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {num:02}: {status} — {label}: {detail}");
    assert!(pass, "criterion {num:02} ({label}) failed: {detail}");
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

struct ScenarioRun {
    dir: PathBuf,
    secs: f64,
}

/// Run the binary with `--out <fresh dir>`, assert success, and return the
/// run directory it reports plus the wall time.
fn run_scenario(tag: &str, args: &[&str], envs: &[(&str, &str)]) -> ScenarioRun {
    let out = fresh_dir(tag);
    let started = Instant::now();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mvlab"));
    cmd.arg("--out").arg(&out).args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let output = cmd.output().unwrap();
    let secs = started.elapsed().as_secs_f64();
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    assert!(
        output.status.success(),
        "mvlab {:?} exited with {:?}\nstdout:\n{}stderr:\n{}",
        args,
        output.status.code(),
        stdout,
        String::from_utf8_lossy(&output.stderr)
    );
    let dir = stdout
        .lines()
        .find_map(|l| l.strip_prefix("run directory: "))
        .expect("binary reports its run directory")
        .trim()
        .into();
    ScenarioRun { dir, secs }
}

/// Parse one of the run CSVs: skip the `# config_hash=…` line, return the
/// header and the data rows as strings.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("read {path:?}: {e}"));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .expect("csv header")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("column {name:?} in {header:?}"))
}

fn cell(row: &[String], idx: usize) -> f64 {
    row[idx].parse().unwrap_or_else(|e| panic!("parse {:?}: {e}", row[idx]))
}

fn gaussian_on(grid: GridSpec, sigma: f64) -> GridFunction {
    GridFunction::from_fn_1d(grid, |x| standard_normal_pdf(x / sigma) / sigma).unwrap()
}

fn hat_on(grid: GridSpec) -> GridFunction {
    GridFunction::from_fn_1d(grid, |x| (1.0 - x.abs()).max(0.0)).unwrap()
}

// ---------------------------------------------------------------------------
// 1. Closed-form oracle match for the plain sign-drift SDE.

#[test]
fn criterion_01_oracle_match() {
    let run = run_scenario(
        "c01-oracle",
        &["experiment", "--scenario", "oracle"],
        &[("RAYON_NUM_THREADS", "1")],
    );
    let (header, rows) = read_csv(&run.dir.join("oracle.csv"));
    let l1 = cell(&rows[0], column(&header, "l1_distance"));
    let pass = l1 <= 0.02 && run.secs <= 60.0;
    verdict(
        1,
        "oracle match",
        pass,
        &format!(
            "L1(histogram at t=1, closed form) = {l1:.4} (gate 0.02), \
             single-threaded wall time {:.1}s (gate 60s)",
            run.secs
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. Interacting sign kernel flattens the kink that the plain sign SDE keeps.

#[test]
fn criterion_02_regularity_contrast() {
    let run = run_scenario("c02-kink", &["experiment", "--scenario", "kink"], &[]);
    let (header, rows) = read_csv(&run.dir.join("kink.csv"));
    let (c_est, c_fac, c_ratio) = (
        column(&header, "estimator"),
        column(&header, "silverman_factor"),
        column(&header, "ratio"),
    );
    let worst = rows
        .iter()
        .map(|r| cell(r, c_ratio))
        .fold(f64::NEG_INFINITY, f64::max);
    let factors: Vec<f64> = rows
        .iter()
        .filter(|r| r[c_est] == "kde")
        .map(|r| cell(r, c_fac))
        .collect();
    let (rh, rrows) = read_csv(&run.dir.join("kink_reference.csv"));
    let rel_err = cell(&rrows[0], column(&rh, "rel_err"));
    let pass = worst < 0.25
        && rel_err <= 0.20
        && factors == [0.5, 1.0, 2.0]
        && run.secs <= 300.0;
    verdict(
        2,
        "regularity contrast",
        pass,
        &format!(
            "max interacting/plain kink ratio {worst:.3} over histogram + Silverman×{factors:?} \
             (gate 0.25); plain-SDE kink vs closed-form jump rel err {rel_err:.3} (gate 0.20); \
             wall time {:.1}s (gate 300s)",
            run.secs
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Single-path increments scale diffusively despite the discontinuous drift.

#[test]
fn criterion_03_increment_scaling() {
    let lags = [1e-4, 1e-3, 1e-2, 1e-1];
    let fit = increment_scaling(&DriftFn::Sign, 1.0, &lags, 1, 10_000, 22).unwrap();
    let pass = (fit.fitted_slope - 0.5).abs() <= 0.05;
    verdict(
        3,
        "increment scaling",
        pass,
        &format!(
            "fitted exponent of E|X(t+τ)−X(t)| over τ ∈ [1e-4, 1e-1] is {:.3} \
             (gate 0.5 ± 0.05, {} paths, sign drift)",
            fit.fitted_slope, fit.sample_count
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Anchored-expansion error ladder: slopes 1, 1.5, 2 by smoothing order.

#[test]
fn criterion_04_expansion_ladder() {
    let eps = [0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625];
    let cases: [(u8, DriftFn, f64, f64); 3] = [
        (0, DriftFn::Sign, 1.0, 0.1),
        (1, DriftFn::Tanh { scale: 1.0 }, 1.5, 0.15),
        (2, DriftFn::Tanh { scale: 1.0 }, 2.0, 0.2),
    ];
    let mut slopes = Vec::new();
    let mut within = true;
    for (order, drift, target, tol) in &cases {
        let r = run_linearization(*order, drift, 1.0, &eps, 10_000, 1).unwrap();
        within &= (r.fitted_slope - target).abs() <= *tol;
        slopes.push(r.fitted_slope);
    }
    let ordered = slopes[0] < slopes[1] && slopes[1] < slopes[2];
    verdict(
        4,
        "expansion error ladder",
        within && ordered,
        &format!(
            "fitted slopes {:.3} / {:.3} / {:.3} for orders 0/1/2 \
             (gates 1.0±0.1, 1.5±0.15, 2.0±0.2), strictly increasing: {ordered}",
            slopes[0], slopes[1], slopes[2]
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. Gaussian difference bound: ‖Δ_h^m ρ_ε‖₁/(|h|/√ε)^m stays below the
//    derivative caps and is exactly invariant under (h, ε) → (2h, 4ε).

#[test]
fn criterion_05_parabolic_difference_bound() {
    // L¹ norms of the standard normal derivatives: ‖ρ'‖ = 2φ(0),
    // ‖ρ''‖ = 4φ(1), ‖ρ'''‖ by midpoint quadrature of |u³−3u|·φ(u).
    let c3: f64 = {
        let n = 1 << 14;
        let (a, b) = (-8.0_f64, 8.0_f64);
        let w = (b - a) / n as f64;
        (0..n)
            .map(|i| {
                let u = a + (i as f64 + 0.5) * w;
                (u * u * u - 3.0 * u).abs() * standard_normal_pdf(u) * w
            })
            .sum()
    };
    let caps = [
        2.0 * standard_normal_pdf(0.0),
        4.0 * standard_normal_pdf(1.0),
        c3,
    ];
    let epsilon = 0.04; // √ε = 0.2
    let hs: Vec<f64> = (0..5).map(|j| 0.2 * 0.5_f64.powi(j)).collect();
    let mut bounded = true;
    let mut worst_fraction = 0.0_f64;
    let mut worst_collapse = 0.0_f64;
    for m in 1..=3u32 {
        let cap = caps[m as usize - 1];
        for entry in pe_bound_check(m, &hs, epsilon).unwrap() {
            bounded &= entry.ratio > 0.0 && entry.ratio <= cap * 1.001;
            worst_fraction = worst_fraction.max(entry.ratio / cap);
        }
        let small = pe_bound_check(m, &[0.1], 0.04).unwrap()[0].ratio;
        let large = pe_bound_check(m, &[0.2], 0.16).unwrap()[0].ratio;
        worst_collapse = worst_collapse.max((small - large).abs());
    }
    let pass = bounded && worst_collapse <= 1e-10;
    verdict(
        5,
        "parabolic difference bound",
        pass,
        &format!(
            "ratios over |h| ≤ √ε, m ∈ {{1,2,3}} stay ≤ derivative caps \
             (max ratio/cap {worst_fraction:.3}); (h,ε)→(2h,4ε) collapse \
             deviation {worst_collapse:.2e} (gate 1e-10)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Dyadic-block index calibration and Besov seminorm behaviour at s = 2.

#[test]
fn criterion_06_besov_calibration() {
    let g12 = GridSpec::new(4.0, 1 << 12, 1).unwrap();
    let j12 = max_level(&g12).unwrap();
    let hat_fit =
        regularity_index(&lp_decompose(&hat_on(g12), j12).unwrap(), Exponent::One).unwrap();
    let ind = GridFunction::from_fn_1d(g12, |x| if x.abs() <= 1.0 { 1.0 } else { 0.0 }).unwrap();
    let ind_fit = regularity_index(&lp_decompose(&ind, j12).unwrap(), Exponent::One).unwrap();
    let g10w = GridSpec::new(8.0, 1 << 10, 1).unwrap();
    let gauss_fit = regularity_index(
        &lp_decompose(&gaussian_on(g10w, 1.0), max_level(&g10w).unwrap()).unwrap(),
        Exponent::One,
    )
    .unwrap();

    let g10 = GridSpec::new(4.0, 1 << 10, 1).unwrap();
    let levels: Vec<u32> = (0..=7).collect();
    let coarse = besov_seminorm(&hat_on(g10), Exponent::One, Exponent::Inf, 2.0, 3, &levels)
        .unwrap();
    let fine = besov_seminorm(&hat_on(g12), Exponent::One, Exponent::Inf, 2.0, 3, &levels)
        .unwrap();
    let drift = (fine - coarse).abs() / coarse;
    let shallow_levels: Vec<u32> = (0..=6).collect();
    let deep_levels: Vec<u32> = (0..=8).collect();
    let shallow = besov_seminorm(
        &hat_on(g10),
        Exponent::One,
        Exponent::Inf,
        2.5,
        3,
        &shallow_levels,
    )
    .unwrap();
    let deep = besov_seminorm(
        &hat_on(g12),
        Exponent::One,
        Exponent::Inf,
        2.5,
        3,
        &deep_levels,
    )
    .unwrap();
    let growth = deep / shallow;

    let pass = !hat_fit.capped
        && (hat_fit.index - 2.0).abs() <= 0.2
        && (ind_fit.index - 1.0).abs() <= 0.2
        && gauss_fit.capped
        && gauss_fit.index == INDEX_CAP
        && drift <= 0.05
        && growth >= 1.8;
    verdict(
        6,
        "Besov calibration",
        pass,
        &format!(
            "indices: hat {:.2} (gate 2.0±0.2), indicator {:.2} (gate 1.0±0.2), \
             Gaussian capped at {INDEX_CAP}; s=2 seminorm drift under refinement {:.1}% \
             (gate 5%); s=2.5 seminorm grows ×{growth:.2} with depth (gate ≥ 1.8)",
            hat_fit.index,
            ind_fit.index,
            100.0 * drift
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Operator identities: binomial recursion, linearity, the easy difference
//    inequality on a smooth battery, and block reconstruction.

#[test]
fn criterion_07_operator_identities() {
    // Recursion Δ^3 = Δ∘Δ² and linearity, to machine precision.
    let g = GridSpec::new(4.0, 512, 1).unwrap();
    let f = gaussian_on(g, 1.0);
    let f2 = GridFunction::from_fn_1d(g, |x| (0.7 * x).sin() * standard_normal_pdf(x / 1.5))
        .unwrap();
    let h = [0.25, 0.0];
    let d3 = delta_power(&f, h, 3).unwrap();
    let d21 = delta_power(&delta_power(&f, h, 2).unwrap(), h, 1).unwrap();
    let rec_err = d3
        .values
        .iter()
        .zip(&d21.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let combo = GridFunction::new(
        g,
        f.values
            .iter()
            .zip(&f2.values)
            .map(|(a, b)| 2.0 * a + 3.0 * b)
            .collect(),
    )
    .unwrap();
    let dc = delta_power(&combo, h, 2).unwrap();
    let da = delta_power(&f, h, 2).unwrap();
    let db = delta_power(&f2, h, 2).unwrap();
    let lin_err = dc
        .values
        .iter()
        .zip(da.values.iter().zip(&db.values))
        .map(|(c, (a, b))| (c - (2.0 * a + 3.0 * b)).abs())
        .fold(0.0_f64, f64::max);

    // Easy inequality ‖Δ_h^m f‖₁ ≤ 1.05·h^m·‖f^(m)‖₁ on a Gaussian battery,
    // with the norm taken over the window where the stencil stays in the box.
    let windowed_l1 = |d: &GridFunction, k: usize, m: u32| -> f64 {
        let upto = d.grid.cells - m as usize * k;
        d.values[..upto].iter().map(|v| v.abs()).sum::<f64>() * d.grid.cell_width()
    };
    let mut easy_ok = true;
    let mut easy_worst = 0.0_f64;
    for (half_width, cells, sigma) in [(3.2, 1024usize, 0.8), (6.4, 2048, 1.0)] {
        let gb = GridSpec::new(half_width, cells, 1).unwrap();
        let fb = gaussian_on(gb, sigma);
        for m in 1..=3u32 {
            let deriv = GridFunction::from_fn_1d(gb, |x| {
                let u = x / sigma;
                let hermite = match m {
                    1 => -u,
                    2 => u * u - 1.0,
                    _ => -(u * u * u - 3.0 * u),
                };
                hermite * standard_normal_pdf(u) / sigma.powi(m as i32 + 1)
            })
            .unwrap();
            for hstep in [0.1, 0.2, 0.4] {
                let k = (hstep / gb.cell_width()).round() as usize;
                let d = delta_power(&fb, [hstep, 0.0], m).unwrap();
                let ratio = windowed_l1(&d, k, m) / (hstep.powi(m as i32) * deriv.l1_norm());
                easy_ok &= ratio <= 1.05;
                easy_worst = easy_worst.max(ratio);
            }
        }
    }

    // Littlewood–Paley blocks sum back to the function.
    let gr = GridSpec::new(8.0, 1 << 10, 1).unwrap();
    let fr = gaussian_on(gr, 1.0);
    let blocks = lp_decompose(&fr, max_level(&gr).unwrap()).unwrap();
    let mut recon_err = 0.0_f64;
    for i in 0..gr.cells {
        let total: f64 = blocks.iter().map(|b| b.values[i]).sum();
        recon_err = recon_err.max((total - fr.values[i]).abs());
    }

    let pass = rec_err <= 1e-12 && lin_err <= 1e-12 && easy_ok && recon_err <= 1e-8;
    verdict(
        7,
        "operator identities",
        pass,
        &format!(
            "Δ³ vs Δ∘Δ² deviation {rec_err:.1e}, linearity deviation {lin_err:.1e} \
             (gates 1e-12); easy-inequality ratio ≤ {easy_worst:.3} over Gaussian battery \
             (gate 1.05); block reconstruction error {recon_err:.1e} (gate 1e-8)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Structural checks on the particle system: conservation, translation
//    equivariance, and direct-vs-FFT drift agreement.

#[test]
fn criterion_08_conservation_and_backends() {
    let config = SimConfig {
        n_particles: 256,
        dim: 1,
        dt: 1e-3,
        t_end: 1.0,
        seed: 11,
        driver: Driver::Brownian,
        drift: DriftSpec::MeanField {
            kernel: KernelClass::Sign,
        },
        backend: Backend::Direct,
        snapshot_times: vec![0.0, 1.0],
    };
    let centered = simulate(
        &config,
        &InitialLaw::Gaussian {
            mean: vec![0.0],
            std: 0.5,
        },
    )
    .unwrap();
    let mean = |xs: &[[f64; 2]]| xs.iter().map(|x| x[0]).sum::<f64>() / xs.len() as f64;
    let m0 = mean(&centered.snapshot_at(0.0).unwrap().positions);
    let m1 = mean(&centered.snapshot_at(1.0).unwrap().positions);
    let residual = (m1 - m0 - mean(&centered.noise_totals)).abs();

    let shift = 0.37;
    let shifted = simulate(
        &config,
        &InitialLaw::Gaussian {
            mean: vec![shift],
            std: 0.5,
        },
    )
    .unwrap();
    let equivariance = centered
        .snapshot_at(1.0)
        .unwrap()
        .positions
        .iter()
        .zip(&shifted.snapshot_at(1.0).unwrap().positions)
        .map(|(x, y)| (y[0] - x[0] - shift).abs())
        .fold(0.0_f64, f64::max);

    let kernel = KernelSpec::new(
        KernelClass::Mollified {
            base: Box::new(KernelClass::Sign),
            delta: 0.1,
        },
        1,
    )
    .unwrap();
    // Golden-ratio sequence in [−1, 1]: equidistributed but incommensurate
    // with every dyadic lattice, so no grid resolution is accidentally exact.
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let positions: Vec<[f64; 2]> = (0..512)
        .map(|i| [-1.0 + 2.0 * ((i as f64 + 0.5) * phi).fract(), 0.0])
        .collect();
    let direct = meanfield_drift_direct(&positions, &kernel).unwrap();
    let mut devs = Vec::new();
    for cells in [1 << 10, 1 << 11, 1 << 12] {
        let fft =
            meanfield_drift_fft(&positions, &kernel, GridSpec::new(4.0, cells, 1).unwrap())
                .unwrap();
        let dev = direct
            .iter()
            .zip(&fft)
            .map(|(a, b)| (a[0] - b[0]).abs())
            .fold(0.0_f64, f64::max);
        devs.push(dev);
    }
    let monotone = devs[0] > devs[1] && devs[1] > devs[2];

    let pass = residual <= 1e-9 && equivariance <= 1e-9 && monotone && devs[2] <= 1e-3;
    verdict(
        8,
        "conservation and backend agreement",
        pass,
        &format!(
            "center-of-mass residual {residual:.1e} over 1000 steps (gate 1e-9); \
             translation equivariance deviation {equivariance:.1e} (gate 1e-9); \
             FFT-vs-direct drift deviation {:.1e} → {:.1e} → {:.1e} under grid refinement \
             (monotone, final gate 1e-3)",
            devs[0], devs[1], devs[2]
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Malliavin layer: exact γ for zero drift, closed-form OU check, Picard
//    series vs ODE within the factorial budget, finite stable inverse moment.

#[test]
fn criterion_09_malliavin() {
    let zero_path = simulate_drift_path(&DriftFn::Zero, 1.0, 1e-3, 17, 0).unwrap();
    let zero_gamma = malliavin_sample(&zero_path, &DriftFn::Zero).unwrap().gamma;
    let zero_err = (zero_gamma - 1.0).abs();

    let ou = DriftFn::Linear { lambda: -1.0 };
    let ou_path = simulate_drift_path(&ou, 1.0, 1e-3, 17, 0).unwrap();
    let ou_gamma = malliavin_sample(&ou_path, &ou).unwrap().gamma;
    let ou_err = (ou_gamma - (1.0 - (-2.0_f64).exp()) / 2.0).abs();

    let drift = DriftFn::Tanh { scale: 1.0 };
    let m = drift.gradient_bound().unwrap();
    let (s, t) = (0.0, 1.0);
    let budget = (m * (t - s)).powi(9) / 362_880.0 * (m * (t - s)).exp() + 1e-6;
    let mut picard_worst = 0.0_f64;
    for sample in 0..5 {
        let path = simulate_drift_path(&drift, t, 1e-5, 13, sample).unwrap();
        let ode = variational_derivative(&path, &drift, s, t).unwrap();
        let series = picard_series(&path, &drift, s, t, 8).unwrap();
        picard_worst = picard_worst.max((series[8] - ode).abs());
    }

    let est = inverse_moment_estimate(
        &DriftFn::MollifiedSign { delta: 0.5 },
        1.0,
        1e-3,
        2.0,
        10_000,
        3,
    )
    .unwrap();

    let pass = zero_err <= 1e-12
        && ou_err <= 1e-5
        && picard_worst <= budget
        && est.mean.is_finite()
        && est.stable;
    verdict(
        9,
        "Malliavin covariance",
        pass,
        &format!(
            "zero-drift γ error {zero_err:.1e} (gate 1e-12); OU γ error {ou_err:.1e} \
             (gate 1e-5); Picard-vs-ODE worst {picard_worst:.2e} within budget {budget:.2e}; \
             E[γ^-2] = {:.2} for mollified sign, halves {:.2}/{:.2} (stable: {})",
            est.mean, est.half_means[0], est.half_means[1], est.stable
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. Kernel-class table: estimated indices never drop (beyond tolerance)
//     when the kernel class improves, at every bandwidth.

#[test]
fn criterion_10_class_table() {
    let run = run_scenario("c10-table", &["experiment", "--scenario", "table"], &[]);
    let (header, rows) = read_csv(&run.dir.join("table.csv"));
    let (c_class, c_rank, c_est, c_fac, c_idx) = (
        column(&header, "class"),
        column(&header, "rank"),
        column(&header, "estimator"),
        column(&header, "silverman_factor"),
        column(&header, "index"),
    );
    // (rank, class, factor) → index for the smoothed estimates.
    let mut entries: Vec<(u64, String, f64, f64)> = rows
        .iter()
        .filter(|r| r[c_est] == "kde")
        .map(|r| {
            (
                r[c_rank].parse::<u64>().unwrap(),
                r[c_class].clone(),
                cell(r, c_fac),
                cell(r, c_idx),
            )
        })
        .collect();
    entries.sort_by(|a, b| (a.2, a.0).partial_cmp(&(b.2, b.0)).unwrap());
    let mut factors: Vec<f64> = entries.iter().map(|e| e.2).collect();
    factors.dedup();
    let n_classes = entries.len() / factors.len();
    assert!(n_classes >= 5, "expected the full 5-class ladder");
    let mut worst_drop = f64::NEG_INFINITY;
    for chunk in entries.chunks(n_classes) {
        for pair in chunk.windows(2) {
            worst_drop = worst_drop.max(pair[0].3 - pair[1].3);
        }
    }
    let pass = worst_drop <= 0.2;
    verdict(
        10,
        "kernel-class index table",
        pass,
        &format!(
            "{n_classes} classes × {} bandwidths; worst index drop when the class \
             improves by one row is {worst_drop:.3} (tolerance 0.2)",
            factors.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. Identical config and seed give byte-identical artifacts regardless of
//     the worker thread count.

#[test]
fn criterion_11_thread_determinism() {
    let one = run_scenario(
        "c11-threads1",
        &["experiment", "--scenario", "oracle"],
        &[("RAYON_NUM_THREADS", "1")],
    );
    let four = run_scenario(
        "c11-threads4",
        &["experiment", "--scenario", "oracle"],
        &[("RAYON_NUM_THREADS", "4")],
    );
    let names = |dir: &Path| -> Vec<String> {
        let mut v: Vec<String> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let files = names(&one.dir);
    let same_set = files == names(&four.dir);
    let mut compared = 0;
    let mut differing = Vec::new();
    for name in &files {
        if name == "manifest.json" {
            continue; // timestamps differ by design
        }
        compared += 1;
        if fs::read(one.dir.join(name)).unwrap() != fs::read(four.dir.join(name)).unwrap() {
            differing.push(name.clone());
        }
    }
    let pass = same_set && differing.is_empty() && compared >= 4;
    verdict(
        11,
        "thread-count determinism",
        pass,
        &format!(
            "{compared} artifacts byte-identical between RAYON_NUM_THREADS=1 and 4 \
             (same file set: {same_set}{})",
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: {differing:?}")
            }
        ),
    );
}
