//! Weighted-bootstrap p-values for the model-specification statistic.

use rayon::prelude::*;

use super::estimate::{gel_fit, gmm_fit, resolve_weight_matrix, EstimationResult, GmmConfig};
use super::kernel::GelKernel;
use super::model::{check_model, MomentModel};
use crate::bootstrap::{order_index, QuantileGrid};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::stats::Sample;
use crate::weights::{RngState, WeightScheme};

#[derive(Debug, Clone, PartialEq)]
pub enum MstMethod {
    Gmm(GmmConfig),
    Gel(GelKernel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MstResult {
    pub stat: f64,
    pub pvalue: f64,
    /// Bootstrap critical values, one per grid level.
    pub quantiles: Vec<f64>,
    pub levels: Vec<f64>,
    /// Sorted replicate statistics.
    pub replicates: Vec<f64>,
    pub estimate: EstimationResult,
    pub failed: usize,
}

pub const MIN_REPS: usize = 99;
/// Largest tolerated share of non-converged replicates.
pub const MAX_FAILED_SHARE: f64 = 0.05;
/// Statistics at or below this are treated as exact zeros when ranking, so
/// that a just-identified fit and its replicates tie.
const ZERO_SNAP: f64 = 1e-10;

fn snap(t: f64) -> f64 {
    if t <= ZERO_SNAP {
        0.0
    } else {
        t
    }
}

/// Bootstrap p-value of the specification statistic. Replicate `b = 1..=B`
/// draws its multipliers from `rng.with_substream(b)` and re-estimates the
/// parameter on the weighted moments. For GMM the weighting matrix is fixed
/// at its value on the original data.
pub fn mst_bootstrap_pvalue(
    model: &dyn MomentModel,
    data: &Sample,
    method: &MstMethod,
    scheme: WeightScheme,
    reps: usize,
    rng: RngState,
) -> Result<MstResult> {
    let n = data.n();
    mst_bootstrap_with(model, data, method, reps, &QuantileGrid::default(), |b| {
        let mut w = vec![0.0; n];
        scheme.fill(&mut rng.with_substream(b).generator(), &mut w);
        w
    })
}

/// As [`mst_bootstrap_pvalue`] with caller-supplied multipliers for replicate
/// `b`.
pub fn mst_bootstrap_with<F>(
    model: &dyn MomentModel,
    data: &Sample,
    method: &MstMethod,
    reps: usize,
    grid: &QuantileGrid,
    weights: F,
) -> Result<MstResult>
where
    F: Fn(u64) -> Vec<f64> + Sync,
{
    if reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!(
            "specification bootstrap needs B >= {MIN_REPS}, got {reps}"
        )));
    }
    check_model(model, data)?;

    let fit: Box<dyn Fn(Option<&[f64]>) -> EstimationResult + Sync> = match method {
        MstMethod::Gmm(config) => {
            let w: SymMatrix = resolve_weight_matrix(model, data, config)?;
            let optim = config.optim;
            Box::new(move |omega| gmm_fit(model, data, &w, omega, &optim))
        }
        MstMethod::Gel(kernel) => {
            let kernel = *kernel;
            Box::new(move |omega| gel_fit(model, data, &kernel, omega, &Default::default()))
        }
    };

    let estimate = fit(None);
    let outcomes: Vec<(f64, bool)> = (1..=reps as u64)
        .into_par_iter()
        .map(|b| {
            let omega = weights(b);
            let r = fit(Some(&omega));
            (r.mst_stat, r.converged && r.mst_stat.is_finite())
        })
        .collect();

    let failed = outcomes.iter().filter(|(_, ok)| !ok).count();
    if failed as f64 > MAX_FAILED_SHARE * reps as f64 {
        return Err(Error::NonConvergence {
            failed,
            total: reps,
        });
    }
    let mut replicates: Vec<f64> = outcomes
        .into_iter()
        .filter(|(t, _)| t.is_finite())
        .map(|(t, _)| snap(t))
        .collect();
    replicates.sort_by(f64::total_cmp);

    let stat = snap(estimate.mst_stat);
    let b = replicates.len();
    let below = replicates.partition_point(|&v| v < stat);
    let pvalue = (1 + b - below) as f64 / (b + 1) as f64;
    let quantiles = grid
        .levels()
        .iter()
        .map(|&a| replicates[order_index(a, b)])
        .collect();

    Ok(MstResult {
        stat,
        pvalue,
        quantiles,
        levels: grid.levels().to_vec(),
        replicates,
        estimate,
        failed,
    })
}
