//! Reference laws for the quadratic-form statistic: chi-square, weighted
//! sums of chi-square(1) variables, and the centred/scaled Gaussian form.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::weights::RngState;

const CHUNK: usize = 1 << 14;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let mut x = Normal::standard().inverse_cdf(p);
    if !x.is_finite() {
        return x;
    }
    // polish with Newton steps, residual taken in the smaller tail
    for _ in 0..3 {
        let resid = if x > 0.0 {
            (1.0 - p) - normal_cdf(-x)
        } else {
            normal_cdf(x) - p
        };
        let dens = normal_pdf(x);
        if dens <= 0.0 {
            break;
        }
        x -= resid / dens;
    }
    x
}

/// Regularised lower incomplete gamma `P(a, x)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(a, x)
}

/// Regularised upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn regularized_upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(a, x)
}

/// Chi-square CDF with `d` degrees of freedom.
pub fn chisq_cdf(d: usize, x: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be >= 1".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("chisq_cdf needs x >= 0, got {x}")));
    }
    Ok(regularized_lower_gamma(d as f64 / 2.0, x / 2.0))
}

pub fn chisq_pdf(d: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = d as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Chi-square quantile by safeguarded Newton iteration inside a bisection
/// bracket.
pub fn chisq_quantile(d: usize, alpha: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0,1), got {alpha}"
        )));
    }
    let cdf = |x: f64| regularized_lower_gamma(d as f64 / 2.0, x / 2.0);
    let mut lo = 0.0;
    let mut hi = (d as f64).max(1.0);
    while cdf(hi) < alpha {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(x) - alpha;
        if f.abs() <= 1e-13 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = chisq_pdf(d, x);
        let newton = x - f / pdf;
        x = if pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(x)
}

/// `m` iid draws of `sum_j lambda_j chi2_{1,j}`.
///
/// Draws are generated in fixed-size chunks, chunk `c` from
/// `rng.chunk_generator(c)`, so the output does not depend on the number of
/// worker threads.
pub fn weighted_chisq_sample(spectrum: &[f64], m: usize, rng: RngState) -> Result<Vec<f64>> {
    if let Some(bad) = spectrum.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weighted chi-square needs nonnegative finite weights, got {bad}"
        )));
    }
    let chunks = m.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(m - c * CHUNK);
            let mut g = rng.chunk_generator(c as u64);
            (0..len)
                .map(|_| {
                    spectrum
                        .iter()
                        .map(|&lam| {
                            let z: f64 = g.sample(StandardNormal);
                            lam * z * z
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}

/// `(Q - tr S) / sqrt(2 tr S^2)`.
pub fn normalized_stat(q: f64, sigma: &SymMatrix) -> Result<f64> {
    let tr2 = sigma.trace_power(2)?;
    if !(tr2 > 0.0) {
        return Err(Error::InvalidArgument(
            "normalized_stat needs tr(Sigma^2) > 0".into(),
        ));
    }
    Ok((q - sigma.trace()) / (2.0 * tr2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dof_closed_form() {
        for &x in &[0.1, 1.0, 3.7, 12.0, 40.0] {
            let exact = 1.0 - (-x / 2.0f64).exp();
            assert!((chisq_cdf(2, x).unwrap() - exact).abs() < 1e-14);
        }
        assert_eq!(chisq_cdf(5, 0.0).unwrap(), 0.0);
        assert!(chisq_cdf(3, -1.0).is_err());
    }

    #[test]
    fn two_dof_quantile_closed_form() {
        for &a in &[0.1, 0.5, 0.9, 0.95, 0.99] {
            let exact = -2.0 * (1.0f64 - a).ln();
            assert!((chisq_quantile(2, a).unwrap() - exact).abs() < 1e-9);
        }
        assert!(chisq_quantile(3, 1.0).is_err());
        assert!(chisq_quantile(3, 0.0).is_err());
    }

    #[test]
    fn quantile_round_trip() {
        for &d in &[1usize, 3, 10, 60] {
            for &a in &[0.9, 0.95, 0.975, 0.99] {
                let x = chisq_quantile(d, a).unwrap();
                assert!((chisq_cdf(d, x).unwrap() - a).abs() < 1e-9, "d={d} a={a}");
            }
        }
    }

    #[test]
    fn negative_spectrum_rejected() {
        assert!(weighted_chisq_sample(&[1.0, -0.5], 10, RngState::default()).is_err());
    }

    #[test]
    fn singleton_spectrum_scales() {
        let rng = RngState::new(11, 0, 0);
        let a = weighted_chisq_sample(&[1.0], 100, rng).unwrap();
        let b = weighted_chisq_sample(&[2.5], 100, rng).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.5 * x - y).abs() < 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn normalized_stat_examples() {
        let s = SymMatrix::identity(4);
        assert_eq!(normalized_stat(4.0, &s).unwrap(), 0.0);
        let d = 7.0f64;
        let s = SymMatrix::identity(7);
        assert!((normalized_stat(d + (2.0 * d).sqrt(), &s).unwrap() - 1.0).abs() < 1e-14);
        let s = SymMatrix::from_diag(&[2.0, 1.0]);
        assert!((normalized_stat(5.0, &s).unwrap() - 2.0 / 10f64.sqrt()).abs() < 1e-14);
        let z = SymMatrix::from_diag(&[0.0, 0.0]);
        assert!(normalized_stat(1.0, &z).is_err());
    }

    #[test]
    fn normal_helpers() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_quantile(normal_cdf(1.0)) - 1.0).abs() < 1e-9);
    }
}
