//! Pathwise Malliavin derivatives for the scalar model `dX = a(t,X)dt + dW`:
//! the variational equation `D_s X_t = 1 + ∫_s^t a'(u, X_u) D_s X_u du`
//! integrated along frozen Euler paths, its Picard series, the Malliavin
//! "matrix" `γ = ∫_0^t (D_s X_t)² ds` (scalar here), Monte-Carlo inverse
//! moments of `det γ`, and an empirical small-ball table against the
//! theoretical lower-bound shape.
//!
//! Derivatives are computed on the same substep grid as the path itself, and
//! `γ` is quadratured on that grid too, so no interpolation bias enters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linearize::DriftFn;
use crate::rng::CounterRng;

/// A scalar Euler path on the uniform grid `t_k = k·dt`, `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct EulerPath {
    pub dt: f64,
    /// `n+1` states, starting from `X_0 = 0`.
    pub values: Vec<f64>,
}

impl EulerPath {
    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    /// Grid index of a time, which must be step-aligned.
    pub fn step_of(&self, time: f64) -> Result<usize> {
        let k = (time / self.dt).round();
        if k < 0.0 || (k * self.dt - time).abs() > 1e-9 * self.dt.max(time.abs()) {
            return Err(invalid(format!(
                "time {time} is not aligned with the path grid (dt = {})",
                self.dt
            )));
        }
        let k = k as usize;
        if k > self.n_steps() {
            return Err(invalid(format!("time {time} lies beyond the path horizon")));
        }
        Ok(k)
    }
}

/// Simulate one Euler path of `dX = a(t,X)dt + dW` from `X_0 = 0` with the
/// counter RNG stream `(seed, sample, step)`.
pub fn simulate_drift_path(
    drift: &DriftFn,
    t: f64,
    dt: f64,
    seed: u64,
    sample: u64,
) -> Result<EulerPath> {
    drift.validate()?;
    if !(t > 0.0) || !(dt > 0.0) || !t.is_finite() || !dt.is_finite() {
        return Err(invalid("horizon and substep must be positive"));
    }
    let n = (t / dt).round();
    if n < 1.0 || (n * dt - t).abs() > 1e-9 * t {
        return Err(invalid(format!(
            "horizon {t} is not a multiple of the substep {dt}"
        )));
    }
    let n = n as usize;
    let root_dt = dt.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut x = 0.0_f64;
    values.push(x);
    for k in 0..n {
        let tk = k as f64 * dt;
        let mut rng = CounterRng::at(seed, sample, k as u64);
        let (g, _) = rng.normal_pair();
        x += drift.eval(tk, x) * dt + root_dt * g;
        values.push(x);
    }
    Ok(EulerPath { dt, values })
}

fn require_gradient(drift: &DriftFn) -> Result<()> {
    if !drift.has_gradient() {
        return Err(invalid(
            "this operation needs a drift gradient; mollify the drift first",
        ));
    }
    Ok(())
}

/// One-step transfer factor of the variational equation by the midpoint rule:
/// `T_k = 1 + dt·A_mid + (dt²/2)·A_mid·A_k` with `A` the drift gradient and
/// the midpoint state interpolated along the frozen path.
fn transfer(path: &EulerPath, drift: &DriftFn, k: usize) -> f64 {
    let dt = path.dt;
    let tk = k as f64 * dt;
    let xk = path.values[k];
    let x_mid = 0.5 * (path.values[k] + path.values[k + 1]);
    let a_k = drift.gradient(tk, xk).expect("gradient checked");
    let a_mid = drift.gradient(tk + 0.5 * dt, x_mid).expect("gradient checked");
    1.0 + dt * a_mid + 0.5 * dt * dt * a_mid * a_k
}

/// `D_s X_t` by integrating the variational ODE from 1 at `s` to `t` along
/// the frozen path.
pub fn variational_derivative(path: &EulerPath, drift: &DriftFn, s: f64, t: f64) -> Result<f64> {
    require_gradient(drift)?;
    let ks = path.step_of(s)?;
    let kt = path.step_of(t)?;
    if ks >= kt {
        return Err(invalid(format!("need s < t, got s = {s}, t = {t}")));
    }
    let mut d = 1.0;
    for k in ks..kt {
        d *= transfer(path, drift, k);
    }
    Ok(d)
}

/// Partial sums of the Picard series
/// `D_s X_t = 1 + Σ_m ∫_{s≤u₁≤…≤u_m≤t} a'(u₁,X_{u₁})···a'(u_m,X_{u_m}) du`.
/// Each simplex integral comes from the previous one by a single cumulative
/// trapezoid integral. Returns `m_max + 1` sums (the first is the identity).
pub fn picard_series(
    path: &EulerPath,
    drift: &DriftFn,
    s: f64,
    t: f64,
    m_max: u32,
) -> Result<Vec<f64>> {
    require_gradient(drift)?;
    let ks = path.step_of(s)?;
    let kt = path.step_of(t)?;
    if ks >= kt {
        return Err(invalid(format!("need s < t, got s = {s}, t = {t}")));
    }
    let dt = path.dt;
    let n = kt - ks;
    let aprime: Vec<f64> = (ks..=kt)
        .map(|k| {
            drift
                .gradient(k as f64 * dt, path.values[k])
                .expect("gradient checked")
        })
        .collect();
    let mut sums = Vec::with_capacity(m_max as usize + 1);
    sums.push(1.0);
    // h_m(u) = ∫_s^u a'(v) h_{m−1}(v) dv on the grid, h_0 ≡ 1.
    let mut h = vec![1.0_f64; n + 1];
    let mut total = 1.0;
    for _ in 1..=m_max {
        let mut next = vec![0.0_f64; n + 1];
        for j in 0..n {
            next[j + 1] =
                next[j] + 0.5 * dt * (aprime[j] * h[j] + aprime[j + 1] * h[j + 1]);
        }
        total += next[n];
        sums.push(total);
        h = next;
    }
    Ok(sums)
}

/// One sample's Malliavin data on the path grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MalliavinSample {
    /// Quadrature nodes `s_k` in `[0, t]` (the path grid).
    pub s_grid: Vec<f64>,
    /// `D_{s_k} X_t` per node (scalar model).
    pub d_values: Vec<f64>,
    /// `γ = ∫_0^t (D_s X_t)² ds` by the trapezoid rule.
    pub gamma: f64,
    /// `det γ` (= `γ` in the scalar model).
    pub det_gamma: f64,
}

/// Assemble the Malliavin matrix of `X_t` along one path: a backward sweep
/// of the one-step transfers gives every `D_{s_k} X_t` in one pass, then the
/// trapezoid rule over the same grid yields `γ`.
pub fn malliavin_sample(path: &EulerPath, drift: &DriftFn) -> Result<MalliavinSample> {
    require_gradient(drift)?;
    let n = path.n_steps();
    let dt = path.dt;
    let mut d_values = vec![1.0_f64; n + 1];
    for k in (0..n).rev() {
        d_values[k] = transfer(path, drift, k) * d_values[k + 1];
    }
    let mut gamma = 0.0;
    for (k, d) in d_values.iter().enumerate() {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        gamma += w * d * d * dt;
    }
    Ok(MalliavinSample {
        s_grid: (0..=n).map(|k| k as f64 * dt).collect(),
        d_values,
        gamma,
        det_gamma: gamma,
    })
}

/// Monte-Carlo estimate of `E[(det γ_{X_t})^{−p}]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseMomentEstimate {
    pub p: f64,
    pub t: f64,
    pub mean: f64,
    /// Means of the two sample halves (stability diagnostic).
    pub half_means: [f64; 2],
    /// Halves agree within 10%.
    pub stable: bool,
    /// Halves differ by more than 25%: estimate flagged as unreliable.
    pub flagged: bool,
    pub sample_count: u64,
}

fn log_mean_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    let s: f64 = logs.iter().map(|&l| (l - m).exp()).sum();
    m + (s / logs.len() as f64).ln()
}

/// `E[(det γ)^{−p}]` over `n_samples` independent paths at substep `dt`.
/// Accumulation is done in log space so large `p` cannot overflow.
pub fn inverse_moment_estimate(
    drift: &DriftFn,
    t: f64,
    dt: f64,
    p: f64,
    n_samples: u64,
    seed: u64,
) -> Result<InverseMomentEstimate> {
    require_gradient(drift)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid(format!("moment order p must be >= 1, got {p}")));
    }
    if n_samples < 2 {
        return Err(invalid("need at least 2 samples for the stability split"));
    }
    let logs: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let path = simulate_drift_path(drift, t, dt, seed, i)?;
            let sample = malliavin_sample(&path, drift)?;
            Ok(-p * sample.det_gamma.ln())
        })
        .collect::<Result<_>>()?;
    let half = logs.len() / 2;
    let mean = log_mean_exp(&logs).exp();
    let h1 = log_mean_exp(&logs[..half]).exp();
    let h2 = log_mean_exp(&logs[half..]).exp();
    let rel = (h1 - h2).abs() / h1.max(h2);
    Ok(InverseMomentEstimate {
        p,
        t,
        mean,
        half_means: [h1, h2],
        stable: rel <= 0.10,
        flagged: rel > 0.25,
        sample_count: n_samples,
    })
}

/// One row of the small-ball table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub epsilon: f64,
    /// Empirical `P(‖D_·X_t‖² ≤ ε)`.
    pub empirical: f64,
    /// The theoretical bound's shape `δ/(δ/2 − ε)` (constant unknown),
    /// absent for `ε ≥ δ/2` where the bound says nothing.
    pub bound_shape: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub delta: f64,
    pub t: f64,
    pub rows: Vec<LowerBoundRow>,
    pub sample_count: u64,
}

/// Empirical small-ball probabilities of `γ = ‖D_·X_t‖²` against the
/// lower-bound shape. Requires `δ < min(t, 1/(2M))` with `M` the drift
/// gradient bound.
pub fn lower_bound_check(
    drift: &DriftFn,
    t: f64,
    dt: f64,
    delta: f64,
    epsilons: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<LowerBoundReport> {
    require_gradient(drift)?;
    let m = drift
        .gradient_bound()
        .ok_or_else(|| invalid("drift gradient bound unavailable"))?;
    let cap = if m > 0.0 { t.min(1.0 / (2.0 * m)) } else { t };
    if !(delta > 0.0 && delta < cap) {
        return Err(invalid(format!(
            "delta must lie in (0, {cap}) for this drift and horizon, got {delta}"
        )));
    }
    if epsilons.is_empty() {
        return Err(invalid("at least one threshold is required"));
    }
    if n_samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let gammas: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let path = simulate_drift_path(drift, t, dt, seed, i)?;
            Ok(malliavin_sample(&path, drift)?.gamma)
        })
        .collect::<Result<_>>()?;
    let rows = epsilons
        .iter()
        .map(|&eps| {
            let hits = gammas.iter().filter(|&&g| g <= eps).count();
            LowerBoundRow {
                epsilon: eps,
                empirical: hits as f64 / n_samples as f64,
                bound_shape: if eps < delta / 2.0 {
                    Some(delta / (delta / 2.0 - eps))
                } else {
                    None
                },
            }
        })
        .collect();
    Ok(LowerBoundReport {
        delta,
        t,
        rows,
        sample_count: n_samples,
    })
}
