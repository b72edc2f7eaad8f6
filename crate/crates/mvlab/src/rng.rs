//! Counter-based random number generation.
//!
//! Every particle owns a logical stream keyed by `(seed, stream, step)`; a
//! generator is constructed at that key on demand, so draws depend only on the
//! key and never on thread scheduling or on how many values other particles
//! consumed. This is what makes simulations bit-reproducible under any degree
//! of parallelism.
//!
//! The generator is a splitmix64-style sequence: the three key words are mixed
//! through the splitmix64 finalizer (with distinct domain-separation constants)
//! into an initial state, and each output advances the state by the golden-ratio
//! increment before finalizing. Per key only a handful of draws are taken
//! (at most a few uniforms per step), far below any quality horizon of the
//! finalizer.

/// Reserved step index for drawing initial conditions, so that time step 0
/// never shares a key with the initial sampling.
pub const INIT_STEP: u64 = u64::MAX;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic generator addressed by `(seed, stream, step)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    /// Construct the generator for one key. The same key always yields the
    /// same sequence of draws.
    pub fn at(seed: u64, stream: u64, step: u64) -> Self {
        let mut s = mix(seed ^ 0x6A09_E667_F3BC_C909);
        s = mix(s.wrapping_add(stream.wrapping_mul(GOLDEN)) ^ 0xBB67_AE85_84CA_A73B);
        s = mix(s.wrapping_add(step.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)) ^ 0x3C6E_F372_FE94_F82B);
        CounterRng { state: s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`; safe to pass to `ln`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals by the Box-Muller transform.
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u = self.next_open01();
        let v = self.next_f64();
        let r = (-2.0 * u.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * v;
        (r * theta.cos(), r * theta.sin())
    }

    /// One standard normal (consumes a full Box-Muller pair).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.normal_pair().0
    }

    /// Standard symmetric α-stable variate, `1 < alpha < 2`, via the
    /// Chambers-Mallows-Stuck transform. The characteristic function of the
    /// output is `exp(-|θ|^α)`.
    pub fn stable_standard(&mut self, alpha: f64) -> f64 {
        debug_assert!(alpha > 1.0 && alpha < 2.0);
        let u = std::f64::consts::PI * (self.next_open01() - 0.5);
        let e = -self.next_open01().ln();
        let s = (alpha * u).sin() / u.cos().powf(1.0 / alpha);
        s * ((u - alpha * u).cos() / e).powf((1.0 - alpha) / alpha)
    }
}
