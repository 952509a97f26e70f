//! Bootstrap multipliers with mean zero and unit variance, and the
//! counter-based RNG addressing used everywhere randomness is needed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Law of the bootstrap multipliers `omega_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightScheme {
    /// Standard normal.
    Gaussian,
    /// `sqrt(12) * U(-1/2, 1/2)`, supported on `[-sqrt 3, sqrt 3]`.
    UniformScaled,
    /// Student t with 3 degrees of freedom divided by `sqrt 3`.
    StudentT3Scaled,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 3] = [
        WeightScheme::Gaussian,
        WeightScheme::UniformScaled,
        WeightScheme::StudentT3Scaled,
    ];

    pub fn token(self) -> &'static str {
        match self {
            WeightScheme::Gaussian => "gaussian",
            WeightScheme::UniformScaled => "uniform",
            WeightScheme::StudentT3Scaled => "t3",
        }
    }

    #[inline]
    pub(crate) fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            WeightScheme::Gaussian => rng.sample(StandardNormal),
            WeightScheme::UniformScaled => 12f64.sqrt() * (rng.random::<f64>() - 0.5),
            WeightScheme::StudentT3Scaled => {
                // t3 / sqrt(3) = N / sqrt(chi2_3)
                let z: f64 = rng.sample(StandardNormal);
                let mut chi2 = 0.0;
                for _ in 0..3 {
                    let g: f64 = rng.sample(StandardNormal);
                    chi2 += g * g;
                }
                z / chi2.sqrt()
            }
        }
    }

    pub(crate) fn fill<R: Rng + ?Sized>(self, rng: &mut R, out: &mut [f64]) {
        for w in out.iter_mut() {
            *w = self.sample(rng);
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(WeightScheme::Gaussian),
            "uniform" => Ok(WeightScheme::UniformScaled),
            "t3" => Ok(WeightScheme::StudentT3Scaled),
            other => Err(Error::InvalidArgument(format!(
                "unknown weight scheme '{other}' (expected gaussian, uniform or t3)"
            ))),
        }
    }
}

/// Analytic moments of a weight scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeMoments {
    pub mean: f64,
    pub variance: f64,
    pub third: f64,
    /// `f64::INFINITY` when the fourth moment does not exist.
    pub fourth: f64,
}

pub fn scheme_moments(scheme: WeightScheme) -> SchemeMoments {
    match scheme {
        WeightScheme::Gaussian => SchemeMoments {
            mean: 0.0,
            variance: 1.0,
            third: 0.0,
            fourth: 3.0,
        },
        // E[(sqrt(12) U)^4] = 144 E[U^4] = 144 / 80
        WeightScheme::UniformScaled => SchemeMoments {
            mean: 0.0,
            variance: 1.0,
            third: 0.0,
            fourth: 1.8,
        },
        // the third moment of t3 is a principal value; t3 has no fourth moment
        WeightScheme::StudentT3Scaled => SchemeMoments {
            mean: 0.0,
            variance: 1.0,
            third: 0.0,
            fourth: f64::INFINITY,
        },
    }
}

/// Address of an independent random stream: `(seed, stream, substream)`.
///
/// Identical addresses always yield identical draws, so results never
/// depend on which thread consumed which stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub substream: u64,
}

impl RngState {
    pub fn new(seed: u64, stream: u64, substream: u64) -> Self {
        Self {
            seed,
            stream,
            substream,
        }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub fn with_substream(self, substream: u64) -> Self {
        Self { substream, ..self }
    }

    pub fn generator(&self) -> ChaCha8Rng {
        self.lane_generator(0)
    }

    /// Generator for chunk `chunk` of a parallel draw; chunks never overlap
    /// with each other or with [`RngState::generator`].
    pub fn chunk_generator(&self, chunk: u64) -> ChaCha8Rng {
        self.lane_generator(chunk + 1)
    }

    fn lane_generator(&self, lane: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        key[16..24].copy_from_slice(&lane.to_le_bytes());
        key[24..32].copy_from_slice(b"qfboot\0\x01");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.substream);
        rng
    }
}

/// `n` iid multipliers from `scheme`, drawn from the stream at `rng`.
pub fn draw_weights(scheme: WeightScheme, n: usize, rng: RngState) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("draw_weights needs n >= 1".into()));
    }
    let mut out = vec![0.0; n];
    scheme.fill(&mut rng.generator(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn tokens_round_trip() {
        for s in WeightScheme::ALL {
            assert_eq!(s.token().parse::<WeightScheme>().unwrap(), s);
        }
        assert!("rademacher".parse::<WeightScheme>().is_err());
    }

    #[test]
    fn uniform_is_bounded() {
        let w = draw_weights(WeightScheme::UniformScaled, 10_000, RngState::new(1, 0, 0)).unwrap();
        let b = 3f64.sqrt();
        assert!(w.iter().all(|&v| (-b..=b).contains(&v)));
    }

    #[test]
    fn gaussian_moments() {
        let w = draw_weights(WeightScheme::Gaussian, 100_000, RngState::new(7, 1, 2)).unwrap();
        let (m, v) = mean_var(&w);
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((v - 1.0).abs() < 0.03, "var {v}");
    }

    #[test]
    fn t3_variance_band() {
        let w =
            draw_weights(WeightScheme::StudentT3Scaled, 100_000, RngState::new(3, 0, 0)).unwrap();
        let (_, v) = mean_var(&w);
        assert!((v - 1.0).abs() < 0.15, "var {v}");
    }

    #[test]
    fn zero_length_rejected() {
        assert!(draw_weights(WeightScheme::Gaussian, 0, RngState::default()).is_err());
    }

    #[test]
    fn analytic_moments() {
        assert_eq!(scheme_moments(WeightScheme::Gaussian).fourth, 3.0);
        assert!((scheme_moments(WeightScheme::UniformScaled).fourth - 144.0 / 80.0).abs() < 1e-15);
        assert!(scheme_moments(WeightScheme::StudentT3Scaled).fourth.is_infinite());
    }

    #[test]
    fn addresses_are_deterministic_and_distinct() {
        let a = RngState::new(5, 2, 9);
        let x = draw_weights(WeightScheme::Gaussian, 16, a).unwrap();
        let y = draw_weights(WeightScheme::Gaussian, 16, a).unwrap();
        assert_eq!(x, y);
        let z = draw_weights(WeightScheme::Gaussian, 16, a.with_substream(10)).unwrap();
        assert_ne!(x, z);
        let c0: f64 = a.chunk_generator(0).sample(StandardNormal);
        let g0: f64 = a.generator().sample(StandardNormal);
        assert_ne!(c0, g0);
    }
}
