//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls into the library's special functions.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Gamma(m / 2) for positive integer m, from the factorial recursions.
pub fn gamma_half(m: usize) -> f64 {
    if m == 1 {
        PI.sqrt()
    } else if m == 2 {
        1.0
    } else {
        (m as f64 / 2.0 - 1.0) * gamma_half(m - 2)
    }
}

pub fn chisq_pdf(d: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = d as f64 / 2.0;
    x.powf(k - 1.0) * (-x / 2.0).exp() / (2f64.powf(k) * gamma_half(d))
}

/// CDF by quadrature after substituting `x = s^2`, which removes the
/// singularity at the origin for `d = 1`.
pub fn chisq_cdf(d: usize, x: f64) -> f64 {
    let k = d as f64 / 2.0;
    let c = 2.0 / (2f64.powf(k) * gamma_half(d));
    let f = |s: f64| c * s.powf(d as f64 - 1.0) * (-s * s / 2.0).exp();
    simpson(&f, 0.0, x.sqrt(), 1e-13)
}

pub fn chisq_quantile(d: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0 * d as f64 + 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chisq_cdf(d, mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `int ramp(u + h z) phi(z) dz`, split at the two kinks of the ramp.
pub fn smoothed_ramp(u: f64, t: f64, delta: f64, h: f64) -> f64 {
    let lim = 40.0;
    let z1 = ((t - delta - u) / h).clamp(-lim, lim);
    let z2 = ((t - u) / h).clamp(-lim, lim);
    let ramp = |z: f64| (u + h * z - t + delta) / delta * phi(z);
    simpson(&ramp, z1, z2, 1e-14) + simpson(&phi, z2, lim, 1e-14)
}

/// Plain mean and standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
