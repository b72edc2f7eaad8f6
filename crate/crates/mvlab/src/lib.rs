//! Numerical laboratory for McKean-Vlasov stochastic differential equations
//! with convolution drift `dX_t = (b * μ_t)(X_t) dt + dW_t`.
//!
//! The crate provides:
//! - interaction kernels of varying roughness ([`kernels`]),
//! - particle simulation with Brownian or α-stable drivers and direct or
//!   FFT-accelerated mean-field drift ([`simulate`]),
//! - density estimation from particle clouds ([`density`]),
//! - Besov/Littlewood-Paley regularity diagnostics ([`regularity`]),
//! - closed-form reference densities for the sign-drift SDE ([`oracle`]),
//! - frozen-field linearization error measurements ([`linearize`]),
//! - Malliavin covariance surrogates along drift linearizations ([`malliavin`]).
//!
//! All randomness flows through counter-based streams ([`rng`]) keyed by
//! `(seed, particle, step)`, so every result is bit-reproducible regardless of
//! thread count.

pub mod density;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod linearize;
pub mod malliavin;
pub mod oracle;
pub mod quad;
pub mod regularity;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use grid::{GridDensity, GridField, GridFunction, GridSpec};

/// Library version, stamped into run manifests by downstream tools.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
