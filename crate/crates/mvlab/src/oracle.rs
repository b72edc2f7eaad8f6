//! Closed-form reference densities for the plain sign-drift SDE
//! `dX_t = −sign(X_t) dt + dW_t`, plus Gaussian and Ornstein-Uhlenbeck
//! marginals used as test oracles.
//!
//! For a start at the origin the time-`t` marginal is
//!
//! ```text
//! p_0(t)(y) = (1/√(2πt)) exp(−(|y|+t)²/(2t)) + exp(−2|y|) Φ((t−|y|)/√t)
//! ```
//!
//! with `Φ` the standard normal CDF. The density is even, has unit mass for
//! every `t > 0` (both facts verified by tests), is Lipschitz, and has a kink
//! at the origin whose one-sided derivative jump is
//! `J(t) = 4(Φ(√t) + φ(√t)/√t)`.
//!
//! For a start at `x0 ≠ 0` the marginal decomposes into a killed part (paths
//! that have not yet hit the origin; Brownian motion with unit drift toward
//! the origin, killed at 0) plus a renewal part over the first hitting time:
//!
//! ```text
//! p_x(t)(y) = q_t(x0, y) + ∫_0^t p_0(t−s)(y) ρ(x0, s) ds
//! ```
//!
//! where `ρ` is the inverse-Gaussian first-passage density of Brownian motion
//! with unit drift toward the origin.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};
use crate::grid::{GridDensity, GridSpec};
use crate::quad::adaptive_simpson;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal probability density.
pub fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Standard normal CDF via the complementary error function, accurate in both
/// tails (no cancellation for large negative arguments).
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("time must be > 0 and finite, got {t}")))
    }
}

/// `p_0(t)(y)` without the domain check; `t > 0` required.
fn p0_raw(t: f64, y: f64) -> f64 {
    let a = y.abs();
    let first = (-(a + t) * (a + t) / (2.0 * t)).exp() / (SQRT_2PI * t.sqrt());
    let second = (-2.0 * a).exp() * standard_normal_cdf((t - a) / t.sqrt());
    first + second
}

/// Marginal density at time `t` of `dX = −sign(X) dt + dW` started at the
/// origin.
pub fn sign_sde_density0(t: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    Ok(p0_raw(t, y))
}

/// One-sided derivative jump `|∂_y p_0(t)(0+) − ∂_y p_0(t)(0−)|` at the kink.
///
/// Differentiating the closed form for `y > 0` gives
/// `∂_y p_0(t)(0+) = −2(Φ(√t) + φ(√t)/√t)`; the density is even, so the jump
/// is twice that magnitude.
pub fn sign_sde_derivative_jump(t: f64) -> f64 {
    let r = t.sqrt();
    4.0 * (standard_normal_cdf(r) + standard_normal_pdf(r) / r)
}

/// First-passage-time density to the origin for Brownian motion with unit
/// drift toward the origin, started at `x0 ≠ 0`:
/// `ρ(x0, s) = |x0|/√(2πs³) · exp(−(|x0|−s)²/(2s))` — the inverse-Gaussian
/// density with mean `|x0|` and shape `x0²`. Returns 0 for `s ≤ 0`.
pub fn fpt_density(x0: f64, s: f64) -> f64 {
    let a = x0.abs();
    if s <= 0.0 || a == 0.0 {
        return 0.0;
    }
    // Log-space evaluation: the prefactor overflows and the exponent
    // underflows separately for small s, but their sum is finite.
    let log = a.ln() - 0.5 * (2.0 * std::f64::consts::PI * s * s * s).ln()
        - (a - s) * (a - s) / (2.0 * s);
    log.exp()
}

/// Marginal density at time `t` of the sign-drift SDE started at `x0`.
///
/// `x0 = 0` falls back to [`sign_sde_density0`]. The renewal integral is split
/// at `s = t/2`: the late-hitting half uses the substitution `u = √(t−s)`
/// (removing the `1/√(t−s)` factor of `p_0` at `y = 0`), the early-hitting
/// half uses `w = |x0|/√s − √s` (mapping the first-passage spike to a unit
/// Gaussian weight, uniformly in `x0`).
pub fn sign_sde_density_x(t: f64, x0: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    if x0 == 0.0 {
        return Ok(p0_raw(t, y));
    }
    let a = x0.abs();
    // Reflect so the start is at +a; the density is mirrored in y.
    let yr = if x0 > 0.0 { y } else { -y };

    // Killed part: Brownian motion with drift −1 from a, absorbed at 0.
    // Nonzero only for yr ≥ 0 (and vanishing at yr = 0).
    let killed = if yr >= 0.0 {
        let z = yr - a + t;
        (-(z * z) / (2.0 * t)).exp() / (SQRT_2PI * t.sqrt())
            * (-(-2.0 * a * yr / t).exp_m1())
    } else {
        0.0
    };

    let half = 0.5 * t;

    // s ∈ [t/2, t]: u = √(t−s), ds = −2u du.
    let late = adaptive_simpson(
        |u| {
            if u <= 0.0 {
                // limit u→0+: p_0(u²)(y)·2u → 2/√(2π) at y = 0, else 0
                return if y == 0.0 {
                    2.0 / SQRT_2PI * fpt_density(a, t)
                } else {
                    0.0
                };
            }
            let s = t - u * u;
            if s <= 0.0 {
                return 0.0;
            }
            2.0 * u * p0_raw(u * u, y) * fpt_density(a, s)
        },
        0.0,
        half.sqrt(),
        5e-11,
    );

    // s ∈ (0, t/2]: w = a/√s − √s, so ρ(a,s) ds = 2a/(√(2π)(a+r²)) e^{−w²/2} dw
    // with r = √s = (−w + √(w²+4a))/2. The integrand is smooth for every a.
    let w0 = a / half.sqrt() - half.sqrt();
    let early = adaptive_simpson(
        |w| {
            let gauss = (-0.5 * w * w).exp();
            if gauss == 0.0 {
                return 0.0;
            }
            let r = 0.5 * (-w + (w * w + 4.0 * a).sqrt());
            let s = r * r;
            2.0 * a / (SQRT_2PI * (a + s)) * gauss * p0_raw(t - s, y)
        },
        w0,
        w0 + 45.0,
        5e-11,
    );

    Ok(killed + late + early)
}

/// Gaussian density with the given mean and (positive) variance.
pub fn gaussian_density(mean: f64, var: f64, y: f64) -> f64 {
    assert!(var > 0.0, "variance must be positive");
    let z = y - mean;
    (-(z * z) / (2.0 * var)).exp() / (SQRT_2PI * var.sqrt())
}

/// Time-`t` marginal of the Ornstein-Uhlenbeck process
/// `dX = −λX dt + dW` started at `x0`: Gaussian with mean `x0·e^{−λt}` and
/// variance `(1 − e^{−2λt})/(2λ)`.
pub fn ou_marginal(lambda: f64, t: f64, x0: f64, y: f64) -> f64 {
    assert!(lambda > 0.0 && t > 0.0, "λ and t must be positive");
    let mean = x0 * (-lambda * t).exp();
    let var = -(-2.0 * lambda * t).exp_m1() / (2.0 * lambda);
    gaussian_density(mean, var, y)
}

/// A closed-form reference density that can be evaluated pointwise or emitted
/// onto a 1-d grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleDensity {
    /// Sign-drift SDE from the origin at time `t`.
    SignSde0 { t: f64 },
    /// Sign-drift SDE from `x0` at time `t`.
    SignSdeX { t: f64, x0: f64 },
    Gaussian { mean: f64, var: f64 },
    Ou { lambda: f64, t: f64, x0: f64 },
}

impl OracleDensity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OracleDensity::SignSde0 { t } | OracleDensity::SignSdeX { t, .. } => check_time(t),
            OracleDensity::Gaussian { var, .. } => {
                if var > 0.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("variance must be > 0, got {var}")))
                }
            }
            OracleDensity::Ou { lambda, t, .. } => {
                check_time(t)?;
                if lambda > 0.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("OU rate must be > 0, got {lambda}")))
                }
            }
        }
    }

    /// Pointwise evaluation; parameters must satisfy [`Self::validate`].
    pub fn evaluate(&self, y: f64) -> f64 {
        match *self {
            OracleDensity::SignSde0 { t } => p0_raw(t, y),
            OracleDensity::SignSdeX { t, x0 } => {
                sign_sde_density_x(t, x0, y).expect("validated parameters")
            }
            OracleDensity::Gaussian { mean, var } => gaussian_density(mean, var, y),
            OracleDensity::Ou { lambda, t, x0 } => ou_marginal(lambda, t, x0, y),
        }
    }

    /// Sample the density at the cell centers of a 1-d grid.
    pub fn on_grid(&self, grid: GridSpec) -> Result<GridDensity> {
        self.validate()?;
        if grid.dim != 1 {
            return Err(invalid("oracle densities are one-dimensional"));
        }
        let values = (0..grid.cells).map(|i| self.evaluate(grid.center(i))).collect();
        GridDensity::new(grid, values)
    }
}
