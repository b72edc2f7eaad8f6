//! Small quadrature helpers: adaptive Simpson for smooth 1-d integrands and a
//! fixed-node trapezoid rule for tabulated data.

/// Adaptive Simpson quadrature on `[a, b]` with absolute tolerance `tol`.
///
/// Recursion depth is capped; at the cap the current Simpson estimate is
/// accepted. Intended for smooth integrands (mollifier profiles, hitting-time
/// convolutions after substitution), not for integrable singularities.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 24)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        let half_tol = 0.5 * tol;
        simpson_rec(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
    }
}

/// Trapezoid rule over equally spaced samples `values` with spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let interior: f64 = values[1..n - 1].iter().sum();
            dx * (0.5 * (values[0] + values[n - 1]) + interior)
        }
    }
}
