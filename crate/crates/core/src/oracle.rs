//! Slow, independent reference computations.
//!
//! These are the cross-checks the `validate` subcommand and the test suites
//! compare the fast implementations against. They use plain quadrature and
//! closed forms and share no code with the functions they check, except
//! where noted.

use std::f64::consts::PI;

use crate::adaptive::x_cdf_approx;
use crate::linalg::Mat2;

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Splits `[a, b]` into `pieces` equal panels before adaptive Simpson, so
/// narrow peaks are not missed by the first coarse estimate.
fn panel_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| adaptive_simpson(f, a + i as f64 * h, a + (i + 1) as f64 * h, tol / pieces as f64))
        .sum()
}

/// `e^{-z} I₀(z)` from the trapezoid rule on `(1/π)∫₀^π e^{z(cos t − 1)} dt`,
/// which converges geometrically for this periodic integrand.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    let n = 200 + (40.0 * z.abs().sqrt()) as usize;
    let h = PI / n as f64;
    let mut s = 0.5 * (1.0 + (-2.0 * z).exp());
    for i in 1..n {
        s += (z * ((i as f64 * h).cos() - 1.0)).exp();
    }
    s / n as f64
}

/// `Q₁(a, b) = ∫_b^∞ x exp(−(x² + a²)/2) I₀(ax) dx` by quadrature.
pub fn marcum_q1_quadrature(a: f64, b: f64) -> f64 {
    let f = |x: f64| {
        let d = x - a;
        x * (-0.5 * d * d).exp() * bessel_i0_scaled(a * x)
    };
    let hi = b.max(a) + 40.0;
    let pieces = 8 + (hi - b) as usize;
    panel_simpson(&f, b, hi, pieces, 1e-13).clamp(0.0, 1.0)
}

/// Misalignment bound as the integral `P(max Z > X) = ∫ F_X(x) f_{max Z}(x) dx`,
/// where `max Z` is the largest of `Q₁ − 3` unit exponentials. `F_X` comes
/// from [`x_cdf_approx`].
pub fn pmis_quadrature(mu_sq: f64, q1: usize) -> f64 {
    let n = (q1 - 3) as i32;
    let f = |x: f64| {
        let e = (-x).exp();
        let fz = n as f64 * (1.0 - e).powi(n - 1) * e;
        x_cdf_approx(x, mu_sq) * fz
    };
    let hi = 60.0 + 2.0 * mu_sq;
    panel_simpson(&f, 0.0, hi, 64, 1e-11)
}

/// Largest singular value of a 2×2 matrix from the trace and determinant of `A^H A`.
pub fn top_singular_value_2x2(a: &Mat2) -> f64 {
    let fro = a.frobenius_sqr();
    let [[p, q], [r, s]] = a.0;
    let det = (p * s - q * r).norm_sqr();
    let disc = (fro * fro - 4.0 * det).max(0.0).sqrt();
    (0.5 * (fro + disc)).sqrt()
}
