//! Catalog of interaction kernels `b : R^d → R^d` spanning a ladder of
//! regularity classes, from smooth through Hölder and bounded-measurable down
//! to capped power singularities, plus mollifications of any of them.
//!
//! Every kernel in the catalog is odd, with the convention `sign(0) = 0` so
//! that `b(0) = 0` holds exactly. Oddness is enforced structurally (evaluation
//! is canonicalized through a half-space) which makes `b(−x) = −b(x)`
//! bit-exact — the pairwise-cancellation and center-of-mass invariants of the
//! simulation module rely on this.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GridField, GridSpec};
use crate::quad::adaptive_simpson;

/// `sign` with the odd convention `sign(0) = 0`.
#[inline]
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The unnormalized smooth bump profile `exp(−1/(1−u²))` on `|u| < 1`.
#[inline]
pub fn bump_profile(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Mass of the unnormalized bump profile, `∫_{−1}^{1} exp(−1/(1−u²)) du`,
/// computed once by quadrature.
pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| adaptive_simpson(bump_profile, -1.0, 1.0, 1e-13))
}

/// The 1-d mollifier `φ_δ(z) = bump(z/δ) / (δ · bump_mass)`, unit mass.
#[inline]
pub fn mollifier_value(delta: f64, z: f64) -> f64 {
    bump_profile(z / delta) / (delta * bump_mass())
}

/// Interaction-kernel class and parameters. Serialized with a `class` tag,
/// e.g. `{"class":"holder","alpha":0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelClass {
    /// `b(x) = −x/|x|` (in 1-d, `−sign(x)`); bounded measurable, odd.
    Sign,
    /// `b(x) = −x/|x| · 1_{|x| ≤ radius}`; bounded measurable with compact
    /// support.
    #[serde(rename = "indicator")]
    Indicator { radius: f64 },
    /// `b(x) = −x/|x| · min(1, |x|^alpha)`; α-Hölder continuous, `alpha ∈ (0,1)`.
    #[serde(rename = "holder")]
    Holder { alpha: f64 },
    /// `b(x) = −x/|x| · tanh(|x|/scale)`; smooth and bounded.
    #[serde(rename = "smooth")]
    Smooth { scale: f64 },
    /// `b(x) = −x/|x| · min(|x|^{−a}, cap) · 1_{|x| ≤ cutoff}`; a capped
    /// power singularity. `p` declares the Lebesgue integrability index of
    /// the uncapped kernel (requires `a·p < dim`).
    #[serde(rename = "singular")]
    Singular { a: f64, cutoff: f64, p: f64, cap: f64 },
    /// Convolution of `base` with the smooth bump mollifier of width `delta`.
    #[serde(rename = "mollified")]
    Mollified { base: Box<KernelClass>, delta: f64 },
    /// The zero kernel (no interaction).
    Zero,
}

impl KernelClass {
    /// Locations where the kernel is not smooth along a 1-d axis; quadrature
    /// against the mollifier splits at these points.
    fn breakpoints_1d(&self) -> Vec<f64> {
        match *self {
            KernelClass::Sign => vec![0.0],
            KernelClass::Indicator { radius } => vec![-radius, 0.0, radius],
            KernelClass::Holder { .. } => vec![-1.0, 0.0, 1.0],
            KernelClass::Smooth { .. } | KernelClass::Zero | KernelClass::Mollified { .. } => {
                Vec::new()
            }
            KernelClass::Singular { a, cutoff, cap, .. } => {
                let rc = cap.powf(-1.0 / a).min(cutoff);
                vec![-cutoff, -rc, 0.0, rc, cutoff]
            }
        }
    }
}

/// A kernel together with its spatial dimension and declared metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    pub class: KernelClass,
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Declared bound: sup-norm for the bounded classes (and additionally a
    /// Hölder-quotient bound for the Hölder class); the cap for the singular
    /// class.
    pub norm_bound: f64,
    /// All catalog kernels are odd; kept as explicit metadata.
    pub odd: bool,
}

fn default_norm_bound(class: &KernelClass) -> f64 {
    match class {
        KernelClass::Sign | KernelClass::Indicator { .. } | KernelClass::Smooth { .. } => 1.0,
        // Sup-norm 1 and Hölder quotient ≤ 2^{1−α} ≤ 2; declare the larger.
        KernelClass::Holder { .. } => 2.0,
        KernelClass::Singular { cap, .. } => *cap,
        KernelClass::Mollified { base, .. } => default_norm_bound(base),
        KernelClass::Zero => 0.0,
    }
}

impl KernelSpec {
    pub fn new(class: KernelClass, dim: usize) -> Result<Self> {
        let spec = KernelSpec {
            norm_bound: default_norm_bound(&class),
            class,
            dim,
            odd: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(invalid(format!(
                "kernel dimension must be 1 or 2, got {}",
                self.dim
            )));
        }
        validate_class(&self.class, self.dim)
    }

    /// Evaluate at a point given as a slice; checks the dimension.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut p = [0.0; 2];
        p[..self.dim].copy_from_slice(x);
        Ok(self.eval_point(p)[..self.dim].to_vec())
    }

    /// Evaluate at a point packed into a fixed pair (unused coordinates 0).
    /// This is the allocation-free path used by the simulation loops.
    #[inline]
    pub fn eval_point(&self, x: [f64; 2]) -> [f64; 2] {
        // Canonicalize through a half-space so oddness is bit-exact even for
        // quadrature-based (mollified) evaluation.
        let lead = if x[0] != 0.0 { x[0] } else { x[1] };
        if lead < 0.0 {
            let v = eval_class(&self.class, [-x[0], -x[1]], self.dim);
            [-v[0], -v[1]]
        } else {
            eval_class(&self.class, x, self.dim)
        }
    }

    /// Sample the kernel at every cell center of a grid.
    pub fn eval_on_grid(&self, grid: GridSpec) -> Result<GridField> {
        if grid.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: grid.dim,
            });
        }
        let mut field = GridField::zeros(grid);
        match self.dim {
            1 => {
                for i in 0..grid.cells {
                    field.components[0][i] = self.eval_point([grid.center(i), 0.0])[0];
                }
            }
            _ => {
                for ix in 0..grid.cells {
                    for iy in 0..grid.cells {
                        let v = self.eval_point([grid.center(ix), grid.center(iy)]);
                        let idx = grid.index2(ix, iy);
                        field.components[0][idx] = v[0];
                        field.components[1][idx] = v[1];
                    }
                }
            }
        }
        Ok(field)
    }

    /// Convolve with the width-`delta` smooth bump, yielding a smooth kernel.
    pub fn mollify(self, delta: f64) -> Result<KernelSpec> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid(format!(
                "mollification width must be > 0, got {delta}"
            )));
        }
        Ok(KernelSpec {
            class: KernelClass::Mollified {
                base: Box::new(self.class),
                delta,
            },
            ..self
        })
    }
}

fn validate_class(class: &KernelClass, dim: usize) -> Result<()> {
    match class {
        KernelClass::Sign | KernelClass::Zero => Ok(()),
        KernelClass::Indicator { radius } => {
            if *radius > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("indicator radius must be > 0, got {radius}")))
            }
        }
        KernelClass::Holder { alpha } => {
            if *alpha > 0.0 && *alpha < 1.0 {
                Ok(())
            } else {
                Err(invalid(format!(
                    "Hölder exponent must lie in (0,1), got {alpha}"
                )))
            }
        }
        KernelClass::Smooth { scale } => {
            if *scale > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("smooth kernel scale must be > 0, got {scale}")))
            }
        }
        KernelClass::Singular { a, cutoff, p, cap } => {
            if !(*a > 0.0) {
                return Err(invalid(format!("singular exponent must be > 0, got {a}")));
            }
            if !(*cutoff > 0.0) {
                return Err(invalid(format!("singular cutoff must be > 0, got {cutoff}")));
            }
            if !(*cap > 0.0) {
                return Err(invalid(format!("singular cap must be > 0, got {cap}")));
            }
            if !(*p >= 1.0) {
                return Err(invalid(format!("integrability index must be ≥ 1, got {p}")));
            }
            if a * p >= dim as f64 {
                return Err(invalid(format!(
                    "|x|^(-{a}) is not locally L^{p} in dimension {dim} (need a·p < dim)"
                )));
            }
            Ok(())
        }
        KernelClass::Mollified { base, delta } => {
            if !(*delta > 0.0) {
                return Err(invalid(format!(
                    "mollification width must be > 0, got {delta}"
                )));
            }
            validate_class(base, dim)
        }
    }
}

/// Evaluate a kernel class at a canonicalized point (leading nonzero
/// coordinate ≥ 0).
fn eval_class(class: &KernelClass, x: [f64; 2], dim: usize) -> [f64; 2] {
    let r = if dim == 1 {
        x[0].abs()
    } else {
        (x[0] * x[0] + x[1] * x[1]).sqrt()
    };
    // Unit direction −x/|x| (zero at the origin).
    let dir = |scale: f64| -> [f64; 2] {
        if r == 0.0 {
            [0.0, 0.0]
        } else {
            [-x[0] / r * scale, -x[1] / r * scale]
        }
    };
    match class {
        KernelClass::Zero => [0.0, 0.0],
        KernelClass::Sign => dir(1.0),
        KernelClass::Indicator { radius } => {
            if r <= *radius {
                dir(1.0)
            } else {
                [0.0, 0.0]
            }
        }
        KernelClass::Holder { alpha } => dir(r.powf(*alpha).min(1.0)),
        KernelClass::Smooth { scale } => dir((r / scale).tanh()),
        KernelClass::Singular { a, cutoff, cap, .. } => {
            if r > *cutoff || r == 0.0 {
                [0.0, 0.0]
            } else {
                dir(r.powf(-a).min(*cap))
            }
        }
        KernelClass::Mollified { base, delta } => match dim {
            1 => [mollified_eval_1d(base, *delta, x[0]), 0.0],
            _ => mollified_eval_2d(base, *delta, x),
        },
    }
}

/// `(base * φ_δ)(x)` in 1-d by adaptive quadrature, split at the base
/// kernel's breakpoints. Tiny slivers (width `1e−12·δ`) around each split
/// point are dropped so the integrand is only ever evaluated where the base
/// is smooth; the induced error is far below the quadrature tolerance.
fn mollified_eval_1d(base: &KernelClass, delta: f64, x: f64) -> f64 {
    let eval1 = |s: f64| eval_class_1d(base, s);
    let mut cuts = vec![-delta, delta];
    for b in base.breakpoints_1d() {
        let z = x - b;
        if z > -delta && z < delta {
            cuts.push(z);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let eps = 1e-12 * delta;
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0] + eps, w[1] - eps);
        if hi > lo {
            acc += adaptive_simpson(|z| eval1(x - z) * bump_profile(z / delta), lo, hi, 1e-11);
        }
    }
    acc / (delta * bump_mass())
}

/// Scalar 1-d evaluation of a class (with the same canonicalization).
fn eval_class_1d(class: &KernelClass, s: f64) -> f64 {
    if s < 0.0 {
        -eval_class(class, [-s, 0.0], 1)[0]
    } else {
        eval_class(class, [s, 0.0], 1)[0]
    }
}

/// `(base * φ_δ)(x)` in 2-d on a fixed 64×64 midpoint rule over the bump
/// support, normalized by the discrete bump mass (so the rule integrates the
/// mollifier to exactly 1 and preserves sup-norm bounds).
fn mollified_eval_2d(base: &KernelClass, delta: f64, x: [f64; 2]) -> [f64; 2] {
    const N: usize = 64;
    let h = 2.0 * delta / N as f64;
    let mut acc = [0.0, 0.0];
    let mut wsum = 0.0;
    for i in 0..N {
        let zx = -delta + (i as f64 + 0.5) * h;
        for j in 0..N {
            let zy = -delta + (j as f64 + 0.5) * h;
            let w = bump_profile((zx * zx + zy * zy).sqrt() / delta);
            if w > 0.0 {
                let p = [x[0] - zx, x[1] - zy];
                // Re-canonicalize the shifted point for the base.
                let lead = if p[0] != 0.0 { p[0] } else { p[1] };
                let v = if lead < 0.0 {
                    let u = eval_class(base, [-p[0], -p[1]], 2);
                    [-u[0], -u[1]]
                } else {
                    eval_class(base, p, 2)
                };
                acc[0] += w * v[0];
                acc[1] += w * v[1];
                wsum += w;
            }
        }
    }
    [acc[0] / wsum, acc[1] / wsum]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Frozen: `∫_{−1}^{1} exp(−1/(1−u²)) du` to 12 digits.
    const BUMP_MASS: f64 = 0.443_993_816_168;

    fn k(class: KernelClass) -> KernelSpec {
        KernelSpec::new(class, 1).unwrap()
    }

    #[test]
    fn bump_mass_matches_frozen_value() {
        assert!((bump_mass() - BUMP_MASS).abs() < 1e-9, "{}", bump_mass());
    }

    #[test]
    fn sign_kernel_values() {
        let s = k(KernelClass::Sign);
        assert_eq!(s.eval(&[0.7]).unwrap(), vec![-1.0]);
        assert_eq!(s.eval(&[-0.7]).unwrap(), vec![1.0]);
        assert_eq!(s.eval(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn holder_kernel_value() {
        let h = k(KernelClass::Holder { alpha: 0.5 });
        let v = h.eval(&[0.25]).unwrap()[0];
        assert!((v + 0.5).abs() < 1e-15, "{v}");
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let s = k(KernelClass::Sign);
        let err = s.eval(&[0.1, 0.2]).unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn eval_on_grid_sign_four_cells() {
        let s = k(KernelClass::Sign);
        let grid = GridSpec::new(1.0, 4, 1).unwrap();
        let f = s.eval_on_grid(grid).unwrap();
        assert_eq!(f.components[0], vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn zero_kernel_grid_is_zero() {
        let z = k(KernelClass::Zero);
        let grid = GridSpec::new(2.0, 8, 1).unwrap();
        let f = z.eval_on_grid(grid).unwrap();
        assert!(f.components[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn oddness_is_bit_exact() {
        let kernels = [
            k(KernelClass::Sign),
            k(KernelClass::Indicator { radius: 0.8 }),
            k(KernelClass::Holder { alpha: 0.3 }),
            k(KernelClass::Smooth { scale: 0.5 }),
            k(KernelClass::Singular {
                a: 0.5,
                cutoff: 1.0,
                p: 1.0,
                cap: 50.0,
            }),
            k(KernelClass::Sign).mollify(0.1).unwrap(),
        ];
        for kern in &kernels {
            for &x in &[0.0, 0.05, 0.3, 0.79, 0.8, 0.81, 1.5] {
                let plus = kern.eval(&[x]).unwrap()[0];
                let minus = kern.eval(&[-x]).unwrap()[0];
                assert_eq!(plus, -minus, "kernel {:?} at x={x}", kern.class);
            }
        }
        // 2-d as well.
        let s2 = KernelSpec::new(KernelClass::Smooth { scale: 1.0 }, 2).unwrap();
        let v = s2.eval(&[0.3, -0.4]).unwrap();
        let w = s2.eval(&[-0.3, 0.4]).unwrap();
        assert_eq!(v[0], -w[0]);
        assert_eq!(v[1], -w[1]);
    }

    #[test]
    fn bounded_classes_respect_norm_bound() {
        let kernels = [
            k(KernelClass::Sign),
            k(KernelClass::Indicator { radius: 1.3 }),
            k(KernelClass::Holder { alpha: 0.7 }),
            k(KernelClass::Smooth { scale: 0.2 }),
        ];
        for kern in &kernels {
            for i in 0..2000 {
                let x = -5.0 + 10.0 * (i as f64 + 0.5) / 2000.0;
                let v = kern.eval(&[x]).unwrap()[0].abs();
                assert!(v <= kern.norm_bound + 1e-12, "{:?} at {x}: {v}", kern.class);
            }
        }
    }

    #[test]
    fn holder_quotient_within_bound() {
        let h = k(KernelClass::Holder { alpha: 0.5 });
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| h.eval(&[x]).unwrap()[0]).collect();
        let mut q: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = xs[j] - xs[i];
                if d <= 1.0 {
                    q = q.max((vals[j] - vals[i]).abs() / d.sqrt());
                }
            }
        }
        assert!(q <= h.norm_bound + 1e-9, "quotient {q}");
        // The sharp quotient for this profile is 2^{1−α} = √2.
        assert!(q > 1.4, "quotient {q}");
    }

    #[test]
    fn singular_cap_and_support() {
        let s = k(KernelClass::Singular {
            a: 0.5,
            cutoff: 1.0,
            p: 1.5,
            cap: 10.0,
        });
        assert_eq!(s.eval(&[0.0]).unwrap()[0], 0.0);
        assert_eq!(s.eval(&[2.0]).unwrap()[0], 0.0);
        // Inside the cap region |x| < cap^{−1/a} = 0.01 the value is ±cap.
        assert_eq!(s.eval(&[0.005]).unwrap()[0], -10.0);
        let v = s.eval(&[0.25]).unwrap()[0];
        assert!((v + 2.0).abs() < 1e-12, "{v}"); // 0.25^{−0.5} = 2
    }

    #[test]
    fn singular_integrability_validated() {
        // a·p ≥ dim is rejected.
        assert!(KernelSpec::new(
            KernelClass::Singular {
                a: 0.5,
                cutoff: 1.0,
                p: 2.0,
                cap: 10.0
            },
            1
        )
        .is_err());
        // The same indices are fine in 2-d.
        assert!(KernelSpec::new(
            KernelClass::Singular {
                a: 0.5,
                cutoff: 1.0,
                p: 2.0,
                cap: 10.0
            },
            2
        )
        .is_ok());
    }

    #[test]
    fn mollified_sign_matches_sign_outside_support() {
        let m = k(KernelClass::Sign).mollify(0.1).unwrap();
        for &x in &[0.11, 0.5, 2.0] {
            let v = m.eval(&[x]).unwrap()[0];
            assert!((v + 1.0).abs() < 1e-8, "at {x}: {v}");
        }
        assert_eq!(m.eval(&[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn mollified_sign_transition_value() {
        let m = k(KernelClass::Sign).mollify(0.05).unwrap();
        let v = m.eval(&[0.01]).unwrap()[0];
        assert!(v < 0.0 && v > -1.0, "{v}");
    }

    #[test]
    fn mollified_grid_is_smooth_and_bounded() {
        let delta = 0.1;
        let m = k(KernelClass::Sign).mollify(delta).unwrap();
        let grid = GridSpec::new(1.0, 256, 1).unwrap();
        let f = m.eval_on_grid(grid).unwrap();
        let maxabs = f.components[0].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(maxabs <= 1.0 + 1e-9, "max |field| {maxabs}");
        // Finite-difference slope bounded by ‖b‖_∞ ∫|φ_δ'| = 2 φ_δ(0) < 2/δ.
        let w = grid.cell_width();
        let mut steep: f64 = 0.0;
        for i in 1..grid.cells {
            steep = steep.max((f.components[0][i] - f.components[0][i - 1]).abs() / w);
        }
        assert!(steep <= 2.0 / delta, "steepest slope {steep}");
        // The transition has width ≈ δ: flat to −1 beyond x = δ.
        let idx = (((delta + 1.0) / w) as usize) + 1;
        assert!((f.components[0][idx] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn mollified_converges_to_base_at_continuity_points() {
        let base = k(KernelClass::Holder { alpha: 0.5 });
        let x = 0.3;
        let exact = base.eval(&[x]).unwrap()[0];
        let mut errs = Vec::new();
        for &delta in &[0.2, 0.1, 0.05] {
            let m = base.clone().mollify(delta).unwrap();
            errs.push((m.eval(&[x]).unwrap()[0] - exact).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 0.05, "{errs:?}");
    }

    #[test]
    fn mollify_rejects_bad_width() {
        assert!(k(KernelClass::Sign).mollify(0.0).unwrap_err().is_usage());
        assert!(k(KernelClass::Sign).mollify(-0.1).unwrap_err().is_usage());
    }

    #[test]
    fn kernel_json_round_trip() {
        let class = KernelClass::Mollified {
            base: Box::new(KernelClass::Holder { alpha: 0.5 }),
            delta: 0.05,
        };
        let text = serde_json::to_string(&class).unwrap();
        let back: KernelClass = serde_json::from_str(&text).unwrap();
        assert_eq!(class, back);
        let short: KernelClass = serde_json::from_str(r#"{"class":"holder","alpha":0.5}"#).unwrap();
        assert_eq!(short, KernelClass::Holder { alpha: 0.5 });
    }

    #[test]
    fn two_dimensional_direction_and_magnitude() {
        let s = KernelSpec::new(KernelClass::Sign, 2).unwrap();
        let v = s.eval(&[3.0, 4.0]).unwrap();
        assert!((v[0] + 0.6).abs() < 1e-15);
        assert!((v[1] + 0.8).abs() < 1e-15);
        let m = KernelSpec::new(KernelClass::Smooth { scale: 1.0 }, 2)
            .unwrap()
            .mollify(0.2)
            .unwrap();
        let v = m.eval(&[0.5, 0.0]).unwrap();
        // Mollification of a smooth kernel stays close to it.
        let exact = -(0.5_f64).tanh();
        assert!((v[0] - exact).abs() < 0.02, "{v:?} vs {exact}");
        assert!(v[1].abs() < 1e-12);
    }
}
