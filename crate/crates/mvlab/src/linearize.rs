//! Stochastic Taylor linearizations of `dX = a(t, X) dt + dW` coupled to the
//! true path, the Gaussian finite-difference bound behind the probability
//! estimate, and increment-scaling checks.
//!
//! The linearization `Y^ε` restarts from the true state at `t − ε` and runs
//! to `t` with a simplified drift:
//! - order 0: no drift, `Y_s = X_{t−ε} + (W_s − W_{t−ε})`;
//! - order 1: drift frozen at the anchor, `a(r, X_{t−ε})`;
//! - order 2: frozen drift plus its gradient ridden by the noise,
//!   `A_r = a(r, X_{t−ε}) + ∂a(r, X_{t−ε}) (W_r − W_{t−ε})`.
//!
//! `X` and every `Y^ε` consume the same Brownian increments, so the
//! approximation error `E|X_t − Y_t^ε|` is measured pathwise at low variance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle::{standard_normal_cdf, standard_normal_pdf};
use crate::rng::CounterRng;

/// Named scalar drift `a(t, x)` with an optional spatial gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DriftFn {
    Zero,
    Constant { c: f64 },
    /// `a(x) = λ·x` (linear; closed-form variational derivative).
    Linear { lambda: f64 },
    /// `a(x) = −sign(x)` (bounded, discontinuous at 0; no gradient).
    Sign,
    /// `a(x) = −tanh(scale·x)` (smooth, Lipschitz).
    Tanh { scale: f64 },
    /// `a(x) = −(2Φ(x/δ) − 1)`: the sign drift mollified at scale `δ`.
    MollifiedSign { delta: f64 },
}

impl DriftFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DriftFn::Tanh { scale } => {
                if scale > 0.0 && scale.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("tanh scale must be positive, got {scale}")))
                }
            }
            DriftFn::MollifiedSign { delta } => {
                if delta > 0.0 && delta.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!(
                        "mollification width must be positive, got {delta}"
                    )))
                }
            }
            DriftFn::Constant { c } => {
                if c.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("constant drift must be finite"))
                }
            }
            DriftFn::Linear { lambda } => {
                if lambda.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("linear drift coefficient must be finite"))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, _t: f64, x: f64) -> f64 {
        match *self {
            DriftFn::Zero => 0.0,
            DriftFn::Constant { c } => c,
            DriftFn::Linear { lambda } => lambda * x,
            DriftFn::Sign => {
                if x > 0.0 {
                    -1.0
                } else if x < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            DriftFn::Tanh { scale } => -(scale * x).tanh(),
            DriftFn::MollifiedSign { delta } => -(2.0 * standard_normal_cdf(x / delta) - 1.0),
        }
    }

    /// Spatial gradient `∂_x a(t, x)`, if the drift is differentiable.
    pub fn gradient(&self, _t: f64, x: f64) -> Option<f64> {
        match *self {
            DriftFn::Zero | DriftFn::Constant { .. } => Some(0.0),
            DriftFn::Linear { lambda } => Some(lambda),
            DriftFn::Sign => None,
            DriftFn::Tanh { scale } => {
                let th = (scale * x).tanh();
                Some(-scale * (1.0 - th * th))
            }
            DriftFn::MollifiedSign { delta } => {
                Some(-2.0 * standard_normal_pdf(x / delta) / delta)
            }
        }
    }

    pub fn has_gradient(&self) -> bool {
        !matches!(self, DriftFn::Sign)
    }

    /// Uniform bound `M = sup |∂_x a|`, when the gradient exists and is
    /// bounded.
    pub fn gradient_bound(&self) -> Option<f64> {
        match *self {
            DriftFn::Zero | DriftFn::Constant { .. } => Some(0.0),
            DriftFn::Linear { lambda } => Some(lambda.abs()),
            DriftFn::Sign => None,
            DriftFn::Tanh { scale } => Some(scale),
            DriftFn::MollifiedSign { delta } => {
                Some(2.0 * standard_normal_pdf(0.0) / delta)
            }
        }
    }
}

/// Approximation-error curve of one linearization order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearizationResult {
    pub order: u8,
    pub t: f64,
    /// Window lengths, strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Monte-Carlo means of `|X_t − Y_t^ε|`.
    pub ae_values: Vec<f64>,
    /// Standard errors of the means.
    pub ae_stderr: Vec<f64>,
    /// Least-squares slope of `log2 AE` against `log2 ε`.
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub sample_count: u64,
}

fn check_multiple(value: f64, dt: f64, what: &str) -> Result<u64> {
    let n = (value / dt).round();
    if n < 1.0 || (n * dt - value).abs() > 1e-9 * value.max(dt) {
        return Err(invalid(format!(
            "{what} {value} is not a positive multiple of the substep {dt}"
        )));
    }
    Ok(n as u64)
}

fn slope_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, se)
}

/// Run the coupled linearization experiment at the given `order` with the
/// default substep `dt = ε_min / 64`.
pub fn run_linearization(
    order: u8,
    drift: &DriftFn,
    t: f64,
    epsilons: &[f64],
    samples: u64,
    seed: u64,
) -> Result<LinearizationResult> {
    let eps_min = epsilons.last().copied().unwrap_or(0.0);
    run_linearization_dt(order, drift, t, epsilons, samples, seed, eps_min / 64.0)
}

/// As [`run_linearization`] with an explicit substep (used by the
/// discretization-stability check).
pub fn run_linearization_dt(
    order: u8,
    drift: &DriftFn,
    t: f64,
    epsilons: &[f64],
    samples: u64,
    seed: u64,
    dt: f64,
) -> Result<LinearizationResult> {
    drift.validate()?;
    if order > 2 {
        return Err(invalid(format!("linearization order must be 0, 1 or 2, got {order}")));
    }
    if order == 2 && !drift.has_gradient() {
        return Err(invalid(
            "order-2 linearization needs a drift gradient; this drift has none",
        ));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("horizon t must be positive, got {t}")));
    }
    if epsilons.is_empty() {
        return Err(invalid("at least one window length is required"));
    }
    if epsilons.windows(2).any(|p| p[1] >= p[0]) {
        return Err(invalid("window lengths must be strictly decreasing"));
    }
    if epsilons[0] > t / 2.0 {
        return Err(invalid(format!(
            "window lengths must satisfy eps <= t/2 (got eps = {} at t = {t})",
            epsilons[0]
        )));
    }
    if epsilons.iter().any(|&e| e <= 0.0) {
        return Err(invalid("window lengths must be positive"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("substep must be positive, got {dt}")));
    }
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let n_steps = check_multiple(t, dt, "horizon")?;
    let mut anchors = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let k = check_multiple(eps, dt, "window length")?;
        anchors.push(n_steps - k);
    }

    let n_eps = epsilons.len();
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut x = 0.0_f64;
            let mut w_cum = 0.0_f64;
            // Per-window state: (y, x_anchor, w_anchor), live once started.
            let mut ys: Vec<Option<(f64, f64, f64)>> = vec![None; n_eps];
            for k in 0..n_steps {
                let tk = k as f64 * dt;
                for (j, &anchor) in anchors.iter().enumerate() {
                    if k == anchor {
                        ys[j] = Some((x, x, w_cum));
                    }
                }
                let mut rng = CounterRng::at(seed, i, k);
                let (g, _) = rng.normal_pair();
                let dw = dt.sqrt() * g;
                for slot in ys.iter_mut() {
                    if let Some((y, xa, wa)) = slot.as_mut() {
                        let a = match order {
                            0 => 0.0,
                            1 => drift.eval(tk, *xa),
                            _ => {
                                drift.eval(tk, *xa)
                                    + drift.gradient(tk, *xa).expect("checked above")
                                        * (w_cum - *wa)
                            }
                        };
                        *y += a * dt + dw;
                    }
                }
                x += drift.eval(tk, x) * dt + dw;
                w_cum += dw;
            }
            ys.iter()
                .map(|slot| {
                    let (y, _, _) = slot.expect("window started before t");
                    (x - y).abs()
                })
                .collect()
        })
        .collect();

    let mut ae_values = Vec::with_capacity(n_eps);
    let mut ae_stderr = Vec::with_capacity(n_eps);
    for j in 0..n_eps {
        let mean = per_sample.iter().map(|row| row[j]).sum::<f64>() / samples as f64;
        let var = per_sample
            .iter()
            .map(|row| (row[j] - mean).powi(2))
            .sum::<f64>()
            / (samples as f64 - 1.0).max(1.0);
        ae_values.push(mean);
        ae_stderr.push((var / samples as f64).sqrt());
    }
    let xs: Vec<f64> = epsilons.iter().map(|e| e.log2()).collect();
    let ys: Vec<f64> = ae_values.iter().map(|v| v.max(1e-300).log2()).collect();
    let (fitted_slope, slope_stderr) = if n_eps >= 2 {
        slope_fit(&xs, &ys)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(LinearizationResult {
        order,
        t,
        epsilons: epsilons.to_vec(),
        ae_values,
        ae_stderr,
        fitted_slope,
        slope_stderr,
        sample_count: samples,
    })
}

/// One row of the Gaussian finite-difference bound report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeEntry {
    pub m: u32,
    pub h: f64,
    pub epsilon: f64,
    /// `‖Δ_h^m ρ_ε‖_{L¹}` by quadrature.
    pub delta_norm: f64,
    /// `delta_norm / (|h|/√ε)^m` — the bounded quantity.
    pub ratio: f64,
}

/// `L¹` norm of the `m`-th difference of the standard normal density at
/// offset `u`, by composite quadrature in normalized coordinates.
fn normalized_delta_l1(m: u32, u: f64) -> f64 {
    let mut binom = vec![1.0_f64];
    for _ in 0..m {
        let mut next = vec![1.0];
        for i in 1..binom.len() {
            next.push(binom[i - 1] + binom[i]);
        }
        next.push(1.0);
        binom = next;
    }
    let reach = 8.0 + m as f64 * u.abs();
    let n = 1 << 15;
    let w = 2.0 * reach / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let x = -reach + (i as f64 + 0.5) * w;
        let mut d = 0.0;
        for (j, &b) in binom.iter().enumerate() {
            let sign = if (m as usize - j) % 2 == 1 { -1.0 } else { 1.0 };
            d += sign * b * standard_normal_pdf(x + j as f64 * u);
        }
        acc += d.abs();
    }
    acc * w
}

/// Finite-difference bound for the Gaussian with covariance `ε`:
/// `‖Δ_h^m ρ_ε‖_{L¹} ≤ C_m (|h|/√ε)^m` for `|h| ≤ √ε`, with
/// `C_m = ‖ρ₁^{(m)}‖_{L¹}`. Computed in normalized coordinates `u = h/√ε`,
/// which makes the self-similar collapse `(h, ε) → (2h, 4ε)` exact.
pub fn pe_bound_check(m: u32, h_list: &[f64], epsilon: f64) -> Result<Vec<PeEntry>> {
    if m < 1 || m > 6 {
        return Err(invalid(format!("difference order must be in 1..=6, got {m}")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid(format!("covariance must be positive, got {epsilon}")));
    }
    let root = epsilon.sqrt();
    let mut out = Vec::with_capacity(h_list.len());
    for &h in h_list {
        if !h.is_finite() {
            return Err(invalid("offsets must be finite"));
        }
        let u = h / root;
        let (delta_norm, ratio) = if h == 0.0 {
            (0.0, 0.0)
        } else {
            let norm = normalized_delta_l1(m, u);
            (norm, norm / u.abs().powi(m as i32))
        };
        out.push(PeEntry {
            m,
            h,
            epsilon,
            delta_norm,
            ratio,
        });
    }
    Ok(out)
}

/// Increment-moment scaling of the SDE path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementScaling {
    pub t: f64,
    pub moment: u32,
    pub lags: Vec<f64>,
    /// Monte-Carlo `E|X_{t+τ} − X_t|^moment` per lag.
    pub values: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub sample_count: u64,
}

/// Monte-Carlo `E|X_{t+τ} − X_t|^m` over the given lags, with the log-log
/// slope. The substep equals the smallest lag.
pub fn increment_scaling(
    drift: &DriftFn,
    t: f64,
    lags: &[f64],
    moment: u32,
    samples: u64,
    seed: u64,
) -> Result<IncrementScaling> {
    drift.validate()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("reference time must be positive, got {t}")));
    }
    if lags.is_empty() {
        return Err(invalid("at least one lag is required"));
    }
    if moment < 1 || moment > 4 {
        return Err(invalid(format!("moment must be in 1..=4, got {moment}")));
    }
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let mut sorted = lags.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] <= 0.0 {
        return Err(invalid("lags must be positive"));
    }
    if sorted.windows(2).any(|p| p[0] == p[1]) {
        return Err(invalid("lags must be distinct"));
    }
    let dt = sorted[0];
    let base_steps = check_multiple(t, dt, "reference time")?;
    let mut marks = Vec::with_capacity(sorted.len());
    for &lag in &sorted {
        marks.push(base_steps + check_multiple(lag, dt, "lag")?);
    }
    let total_steps = *marks.last().expect("nonempty");

    let sums: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut x = 0.0_f64;
            let mut x_ref = 0.0_f64;
            let mut row = vec![0.0; sorted.len()];
            for k in 0..total_steps {
                let tk = k as f64 * dt;
                let mut rng = CounterRng::at(seed, i, k);
                let (g, _) = rng.normal_pair();
                x += drift.eval(tk, x) * dt + dt.sqrt() * g;
                let done = k + 1;
                if done == base_steps {
                    x_ref = x;
                }
                for (j, &mark) in marks.iter().enumerate() {
                    if done == mark {
                        row[j] = (x - x_ref).abs().powi(moment as i32);
                    }
                }
            }
            row
        })
        // Ordered collect + serial accumulation keeps the float sum identical
        // for every thread count.
        .collect::<Vec<_>>()
        .iter()
        .fold(vec![0.0; sorted.len()], |mut a, b| {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai += bi;
            }
            a
        });
    let values: Vec<f64> = sums.iter().map(|s| s / samples as f64).collect();
    let xs: Vec<f64> = sorted.iter().map(|l| l.log2()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.max(1e-300).log2()).collect();
    let (fitted_slope, slope_stderr) = slope_fit(&xs, &ys);
    Ok(IncrementScaling {
        t,
        moment,
        lags: sorted,
        values,
        fitted_slope,
        slope_stderr,
        sample_count: samples,
    })
}
