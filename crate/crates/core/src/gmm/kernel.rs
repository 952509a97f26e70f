//! Concave GEL criterion functions normalised so that `s'(0) = s''(0) = -1`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GelKind {
    /// Empirical likelihood, `s(v) = ln(1 - v)`.
    El,
    /// Exponential tilting, `s(v) = -exp(v)`.
    Et,
    /// Continuously updated GMM, `s(v) = -(1 + v)^2 / 2`.
    Cue,
}

impl GelKind {
    pub const ALL: [GelKind; 3] = [GelKind::El, GelKind::Et, GelKind::Cue];

    pub fn token(self) -> &'static str {
        match self {
            GelKind::El => "el",
            GelKind::Et => "et",
            GelKind::Cue => "cue",
        }
    }
}

impl fmt::Display for GelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for GelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "el" => Ok(GelKind::El),
            "et" => Ok(GelKind::Et),
            "cue" => Ok(GelKind::Cue),
            other => Err(Error::InvalidArgument(format!(
                "unknown GEL kernel '{other}' (expected el, et or cue)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GelKernel {
    pub kind: GelKind,
    /// Supremum of the domain of `s`; `+inf` when unrestricted.
    pub domain_upper: f64,
}

pub fn kernel(kind: GelKind) -> GelKernel {
    let domain_upper = match kind {
        GelKind::El => 1.0,
        GelKind::Et | GelKind::Cue => f64::INFINITY,
    };
    GelKernel { kind, domain_upper }
}

/// Parses a kernel token and returns the kernel.
pub fn kernel_from_str(kind: &str) -> Result<GelKernel> {
    Ok(kernel(kind.parse()?))
}

impl GelKernel {
    /// `s(v)`; `-inf` outside the domain.
    #[inline]
    pub fn s(&self, v: f64) -> f64 {
        match self.kind {
            GelKind::El => {
                if v < 1.0 {
                    (-v).ln_1p()
                } else {
                    f64::NEG_INFINITY
                }
            }
            GelKind::Et => -v.exp(),
            GelKind::Cue => -0.5 * (1.0 + v) * (1.0 + v),
        }
    }

    #[inline]
    pub fn s1(&self, v: f64) -> f64 {
        match self.kind {
            GelKind::El => -1.0 / (1.0 - v),
            GelKind::Et => -v.exp(),
            GelKind::Cue => -(1.0 + v),
        }
    }

    #[inline]
    pub fn s2(&self, v: f64) -> f64 {
        match self.kind {
            GelKind::El => -1.0 / ((1.0 - v) * (1.0 - v)),
            GelKind::Et => -v.exp(),
            GelKind::Cue => -1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation() {
        for kind in GelKind::ALL {
            let k = kernel(kind);
            assert!((k.s1(0.0) + 1.0).abs() < 1e-12, "{kind}");
            assert!((k.s2(0.0) + 1.0).abs() < 1e-12, "{kind}");
        }
        assert_eq!(kernel(GelKind::Cue).s(0.0), -0.5);
        assert_eq!(kernel(GelKind::El).s(0.0), 0.0);
        assert_eq!(kernel(GelKind::Et).s(0.0), -1.0);
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for kind in GelKind::ALL {
            let k = kernel(kind);
            for &v in &[-0.7, -0.1, 0.3, 0.8] {
                let d1 = (k.s(v + h) - k.s(v - h)) / (2.0 * h);
                let d2 = (k.s1(v + h) - k.s1(v - h)) / (2.0 * h);
                assert!((d1 - k.s1(v)).abs() < 1e-6 * (1.0 + d1.abs()), "{kind} {v}");
                assert!((d2 - k.s2(v)).abs() < 1e-5 * (1.0 + d2.abs()), "{kind} {v}");
            }
        }
    }

    #[test]
    fn el_domain() {
        let k = kernel(GelKind::El);
        assert_eq!(k.domain_upper, 1.0);
        assert_eq!(k.s(1.0), f64::NEG_INFINITY);
        assert!("gmm".parse::<GelKind>().is_err());
        assert_eq!(kernel_from_str("ET").unwrap().kind, GelKind::Et);
    }
}
