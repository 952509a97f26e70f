//! Weighted-bootstrap law of the quadratic-form statistic, its empirical
//! quantiles, p-values and the coverage discrepancy over a level grid.

use rayon::prelude::*;

use crate::error::{dim_err, Error, Result};
use crate::stats::Sample;
use crate::weights::{RngState, WeightScheme};

/// Ascending set of probability levels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    levels: Vec<f64>,
}

impl QuantileGrid {
    pub const DEFAULT_LEVELS: [f64; 4] = [0.900, 0.950, 0.975, 0.990];

    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("quantile grid is empty".into()));
        }
        if let Some(a) = levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidArgument(format!("level {a} is not in (0,1)")));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "quantile levels must be strictly increasing".into(),
            ));
        }
        Ok(Self { levels })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let levels = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad level '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

impl Default for QuantileGrid {
    fn default() -> Self {
        Self {
            levels: Self::DEFAULT_LEVELS.to_vec(),
        }
    }
}

/// Sorted bootstrap replicates of `Q*_n` given the data.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDistribution {
    replicates: Vec<f64>,
    scheme: WeightScheme,
    base: RngState,
}

impl BootstrapDistribution {
    /// Wraps precomputed replicate values; they are sorted here.
    pub fn from_replicates(mut replicates: Vec<f64>, scheme: WeightScheme, base: RngState) -> Result<Self> {
        if replicates.is_empty() {
            return Err(Error::InvalidArgument("bootstrap needs B >= 1".into()));
        }
        if replicates.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite bootstrap replicate".into()));
        }
        replicates.sort_by(f64::total_cmp);
        Ok(Self {
            replicates,
            scheme,
            base,
        })
    }

    pub fn replicates(&self) -> &[f64] {
        &self.replicates
    }

    pub fn reps(&self) -> usize {
        self.replicates.len()
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }

    pub fn base_rng(&self) -> RngState {
        self.base
    }

    /// The `ceil(alpha * B)`-th order statistic (1-based).
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile level must lie in (0,1), got {alpha}"
            )));
        }
        Ok(self.replicates[order_index(alpha, self.reps())])
    }

    /// `(1 + #{replicates >= observed}) / (B + 1)`.
    pub fn pvalue(&self, observed: f64) -> f64 {
        let below = self.replicates.partition_point(|&v| v < observed);
        let at_or_above = self.reps() - below;
        (1 + at_or_above) as f64 / (self.reps() + 1) as f64
    }
}

/// Zero-based index of the `ceil(alpha * b)`-th order statistic. The product
/// is nudged down by a few ulps so that e.g. `0.95 * 100` selects the 95th
/// value rather than the 96th.
pub(crate) fn order_index(alpha: f64, b: usize) -> usize {
    let k = (alpha * b as f64 * (1.0 - 4.0 * f64::EPSILON)).ceil() as usize;
    k.clamp(1, b) - 1
}

/// `B` replicates of `n ||n^{-1} sum_i omega_i Z_i||^2`; replicate
/// `b = 1..=B` draws its weights from `rng.with_substream(b)`.
pub fn bootstrap_distribution(
    sample: &Sample,
    scheme: WeightScheme,
    reps: usize,
    rng: RngState,
) -> Result<BootstrapDistribution> {
    if reps == 0 {
        return Err(Error::InvalidArgument("bootstrap needs B >= 1".into()));
    }
    let replicates: Vec<f64> = (1..=reps as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; sample.n()], vec![0.0; sample.d()]),
            |(w, acc), b| replicate_stat(sample, scheme, rng.with_substream(b), w, acc),
        )
        .collect();
    BootstrapDistribution::from_replicates(replicates, scheme, rng)
}

/// Sequential variant used inside already-parallel Monte Carlo loops.
pub(crate) fn bootstrap_replicates_seq(
    sample: &Sample,
    scheme: WeightScheme,
    reps: usize,
    rng: RngState,
) -> Vec<f64> {
    let mut w = vec![0.0; sample.n()];
    let mut acc = vec![0.0; sample.d()];
    let mut out: Vec<f64> = (1..=reps as u64)
        .map(|b| replicate_stat(sample, scheme, rng.with_substream(b), &mut w, &mut acc))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[inline]
fn replicate_stat(
    sample: &Sample,
    scheme: WeightScheme,
    rng: RngState,
    w: &mut [f64],
    acc: &mut [f64],
) -> f64 {
    scheme.fill(&mut rng.generator(), w);
    acc.iter_mut().for_each(|v| *v = 0.0);
    for (row, &wi) in sample.rows().zip(w.iter()) {
        for (a, z) in acc.iter_mut().zip(row) {
            *a += wi * z;
        }
    }
    acc.iter().map(|s| s * s).sum::<f64>() / sample.n() as f64
}

pub fn bootstrap_quantile(dist: &BootstrapDistribution, alpha: f64) -> Result<f64> {
    dist.quantile(alpha)
}

pub fn bootstrap_pvalue(dist: &BootstrapDistribution, observed: f64) -> f64 {
    dist.pvalue(observed)
}

/// Per-level `|#{r : Q_r >= t_r(a)} / R - (1 - a)|`.
///
/// `quantiles[r][k]` is the critical value used in replication `r` at level
/// `grid.levels()[k]`.
pub fn coverage_errors(mc_stats: &[f64], quantiles: &[Vec<f64>], grid: &QuantileGrid) -> Result<Vec<f64>> {
    if mc_stats.is_empty() {
        return Err(Error::InvalidArgument("no Monte Carlo replications".into()));
    }
    if quantiles.len() != mc_stats.len() {
        return Err(dim_err(mc_stats.len(), quantiles.len()));
    }
    if let Some(q) = quantiles.iter().find(|q| q.len() != grid.len()) {
        return Err(dim_err(grid.len(), q.len()));
    }
    let r = mc_stats.len() as f64;
    Ok(grid
        .levels()
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let hits = mc_stats
                .iter()
                .zip(quantiles)
                .filter(|(q, t)| **q >= t[k])
                .count();
            (hits as f64 / r - (1.0 - a)).abs()
        })
        .collect())
}

/// `max_a |P(Q >= t(a)) - (1 - a)|` over the grid.
pub fn coverage_discrepancy(mc_stats: &[f64], quantiles: &[Vec<f64>], grid: &QuantileGrid) -> Result<f64> {
    Ok(coverage_errors(mc_stats, quantiles, grid)?
        .into_iter()
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn dist(values: &[f64]) -> BootstrapDistribution {
        BootstrapDistribution::from_replicates(values.to_vec(), WeightScheme::Gaussian, RngState::default())
            .unwrap()
    }

    #[test]
    fn quantile_examples() {
        let d = dist(&[4.0, 2.0, 1.0, 3.0]);
        assert_eq!(d.quantile(0.5).unwrap(), 2.0);
        assert_eq!(d.quantile(0.9).unwrap(), 4.0);
        assert!(d.quantile(1.0).is_err());
        assert!(d.quantile(0.0).is_err());
    }

    #[test]
    fn exact_products_pick_lower_order_statistic() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let d = dist(&values);
        assert_eq!(d.quantile(0.95).unwrap(), 95.0);
        assert_eq!(d.quantile(0.99).unwrap(), 99.0);
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(dist(&values).quantile(0.975).unwrap(), 975.0);
    }

    #[test]
    fn pvalue_examples() {
        let values: Vec<f64> = (1..=99).map(f64::from).collect();
        let d = dist(&values);
        assert_eq!(d.pvalue(0.0), 1.0);
        assert_eq!(d.pvalue(1000.0), 1.0 / 100.0);
        // median 50: #{v >= 50} = 50
        assert_eq!(d.pvalue(50.0), 51.0 / 100.0);
    }

    #[test]
    fn zero_reps_rejected() {
        let s = Sample::new(Array2::zeros((3, 2))).unwrap();
        assert!(bootstrap_distribution(&s, WeightScheme::Gaussian, 0, RngState::default()).is_err());
    }

    #[test]
    fn zero_sample_gives_zero_replicates() {
        let s = Sample::new(Array2::zeros((10, 3))).unwrap();
        let d = bootstrap_distribution(&s, WeightScheme::Gaussian, 50, RngState::new(1, 0, 0)).unwrap();
        assert!(d.replicates().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_row_is_squared_weight_times_norm() {
        let s = Sample::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let rng = RngState::new(2, 5, 0);
        let d = bootstrap_distribution(&s, WeightScheme::UniformScaled, 20, rng).unwrap();
        let mut expected: Vec<f64> = (1..=20)
            .map(|b| {
                let w = crate::weights::draw_weights(WeightScheme::UniformScaled, 1, rng.with_substream(b))
                    .unwrap()[0];
                w * w * 25.0
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in d.replicates().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn sequential_matches_parallel() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        let s = Sample::from_rows(&rows).unwrap();
        let rng = RngState::new(9, 3, 0);
        let par = bootstrap_distribution(&s, WeightScheme::Gaussian, 64, rng).unwrap();
        let seq = bootstrap_replicates_seq(&s, WeightScheme::Gaussian, 64, rng);
        assert_eq!(par.replicates(), seq.as_slice());
    }

    #[test]
    fn coverage_edge_cases() {
        let grid = QuantileGrid::default();
        let stats = vec![1.0, 2.0, 3.0];
        let inf = vec![vec![f64::INFINITY; 4]; 3];
        let k = coverage_discrepancy(&stats, &inf, &grid).unwrap();
        assert!((k - 0.10).abs() < 1e-12);

        // single replication: every error is a or 1 - a
        let errs = coverage_errors(&[1.0], &[vec![0.5, 0.5, 2.0, 2.0]], &grid).unwrap();
        for (e, a) in errs.iter().zip(grid.levels()) {
            assert!((e - a).abs() < 1e-12 || (e - (1.0 - a)).abs() < 1e-12);
        }

        assert!(coverage_errors(&stats, &inf[..2], &grid).is_err());
        assert!(coverage_errors(&stats, &[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]], &grid).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(QuantileGrid::new(vec![0.9, 0.9]).is_err());
        assert!(QuantileGrid::new(vec![0.5, 1.0]).is_err());
        assert_eq!(QuantileGrid::parse("0.9,0.95,0.975,0.99").unwrap(), QuantileGrid::default());
    }
}
