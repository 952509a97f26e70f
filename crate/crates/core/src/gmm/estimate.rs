//! GMM and GEL estimators and their specification-test statistics, with
//! optional per-observation multipliers for the bootstrap analogs.

use ndarray::Array2;

use super::kernel::GelKernel;
use super::model::{check_model, moment_rows, MomentModel};
use super::optim::{minimize_box, OptimOptions};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{Cholesky, SymMatrix};
use crate::stats::Sample;

/// Weighting matrix for the GMM criterion.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMatrix {
    Identity,
    /// Inverse second moment of `g` at a first-step identity-weighted
    /// estimate.
    TwoStep,
    User(SymMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub weight_matrix: WeightMatrix,
    pub optim: OptimOptions,
}

impl GmmConfig {
    pub fn new(weight_matrix: WeightMatrix) -> Self {
        Self {
            weight_matrix,
            optim: OptimOptions::default(),
        }
    }
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self::new(WeightMatrix::Identity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    pub objective_value: f64,
    pub mst_stat: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn check_weights(data: &Sample, weights: Option<&[f64]>) -> Result<()> {
    match weights {
        Some(w) if w.len() != data.n() => Err(dim_err(data.n(), w.len())),
        Some(w) if w.iter().any(|v| !v.is_finite()) => {
            Err(Error::InvalidInput("multipliers must be finite".into()))
        }
        _ => Ok(()),
    }
}

/// `n^{-1} sum_i w_i g(X_i, theta)`.
pub(crate) fn mean_moment(
    model: &dyn MomentModel,
    data: &Sample,
    theta: &[f64],
    weights: Option<&[f64]>,
) -> Vec<f64> {
    let d = model.moment_dim();
    let mut g = vec![0.0; d];
    let mut acc = vec![0.0; d];
    for (i, row) in data.rows().enumerate() {
        model.moments(row, theta, &mut g);
        let w = weights.map_or(1.0, |w| w[i]);
        for (a, v) in acc.iter_mut().zip(&g) {
            *a += w * v;
        }
    }
    let n = data.n() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// `gbar' W gbar` with `gbar = n^{-1} sum_i w_i g(X_i, theta)`.
pub fn gmm_objective(
    model: &dyn MomentModel,
    data: &Sample,
    theta: &[f64],
    w: &SymMatrix,
    weights: Option<&[f64]>,
) -> Result<f64> {
    check_model(model, data)?;
    if theta.len() != model.param_dim() {
        return Err(dim_err(model.param_dim(), theta.len()));
    }
    if w.dim() != model.moment_dim() {
        return Err(dim_err(format!("{0}x{0} weight matrix", model.moment_dim()), w.dim()));
    }
    check_weights(data, weights)?;
    Ok(w.quad_form(&mean_moment(model, data, theta, weights)))
}

/// Resolves the configured weighting matrix on the given data. Two-step
/// inverts the uncentred second moment of `g` at the identity-weighted
/// estimate.
pub fn resolve_weight_matrix(model: &dyn MomentModel, data: &Sample, config: &GmmConfig) -> Result<SymMatrix> {
    check_model(model, data)?;
    let d = model.moment_dim();
    match &config.weight_matrix {
        WeightMatrix::Identity => Ok(SymMatrix::identity(d)),
        WeightMatrix::User(w) => {
            if w.dim() != d {
                return Err(dim_err(format!("{d}x{d} weight matrix"), w.dim()));
            }
            if Cholesky::new(w.view()).is_none() {
                return Err(Error::InvalidInput("user weight matrix is not positive definite".into()));
            }
            Ok(w.clone())
        }
        WeightMatrix::TwoStep => {
            let first = gmm_fit(model, data, &SymMatrix::identity(d), None, &config.optim);
            let g = moment_rows(model, data, &first.theta_hat);
            let omega = second_moment(&g, data.n(), d);
            omega.inverse_pd()
        }
    }
}

fn second_moment(rows: &[f64], n: usize, d: usize) -> SymMatrix {
    let mut m = Array2::<f64>::zeros((d, d));
    for g in rows.chunks_exact(d) {
        for a in 0..d {
            for b in 0..=a {
                m[[a, b]] += g[a] * g[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            let v = m[[a, b]] / n as f64;
            m[[a, b]] = v;
            m[[b, a]] = v;
        }
    }
    SymMatrix::from_symmetric_unchecked(m)
}

/// GMM estimate and `T = n * Q(theta_hat)`.
pub fn gmm_estimate(model: &dyn MomentModel, data: &Sample, config: &GmmConfig) -> Result<EstimationResult> {
    let w = resolve_weight_matrix(model, data, config)?;
    Ok(gmm_fit(model, data, &w, None, &config.optim))
}

/// GMM fit with a fixed weighting matrix and optional multipliers `w_i`
/// applied to `g(X_i, .)`.
pub fn gmm_estimate_with(
    model: &dyn MomentModel,
    data: &Sample,
    w: &SymMatrix,
    weights: Option<&[f64]>,
    optim: &OptimOptions,
) -> Result<EstimationResult> {
    check_model(model, data)?;
    if w.dim() != model.moment_dim() {
        return Err(dim_err(format!("{0}x{0} weight matrix", model.moment_dim()), w.dim()));
    }
    check_weights(data, weights)?;
    Ok(gmm_fit(model, data, w, weights, optim))
}

pub(crate) fn gmm_fit(
    model: &dyn MomentModel,
    data: &Sample,
    w: &SymMatrix,
    weights: Option<&[f64]>,
    optim: &OptimOptions,
) -> EstimationResult {
    let objective = |theta: &[f64]| w.quad_form(&mean_moment(model, data, theta, weights));
    let m = minimize_box(objective, model.theta_bounds(), optim);
    let value = m.value;
    EstimationResult {
        mst_stat: data.n() as f64 * value,
        objective_value: value,
        theta_hat: m.x,
        converged: m.converged,
        iterations: m.iterations,
    }
}

/// Maximiser of the GEL inner problem at a fixed parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub lambda: Vec<f64>,
    /// `sum_i s(lambda' h_i)` at the returned `lambda`.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Squared Newton decrement at each accepted iterate.
    pub decrements: Vec<f64>,
}

const INNER_MAX_ITER: usize = 200;
const INNER_GRAD_TOL: f64 = 1e-10;
const RIDGE_RETRIES: usize = 8;

/// `sup_lambda sum_i s(lambda' w_i g(X_i, theta))` by damped Newton from
/// `lambda = 0`.
pub fn gel_inner_solve(
    model: &dyn MomentModel,
    data: &Sample,
    theta: &[f64],
    kernel: &GelKernel,
    weights: Option<&[f64]>,
) -> Result<InnerSolution> {
    check_model(model, data)?;
    if theta.len() != model.param_dim() {
        return Err(dim_err(model.param_dim(), theta.len()));
    }
    check_weights(data, weights)?;
    let h = weighted_rows(model, data, theta, weights);
    Ok(inner_newton(&h, data.n(), model.moment_dim(), kernel))
}

fn weighted_rows(model: &dyn MomentModel, data: &Sample, theta: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    let d = model.moment_dim();
    let mut h = moment_rows(model, data, theta);
    if let Some(w) = weights {
        for (row, wi) in h.chunks_exact_mut(d).zip(w) {
            row.iter_mut().for_each(|v| *v *= wi);
        }
    }
    h
}

fn inner_value(h: &[f64], d: usize, lambda: &[f64], kernel: &GelKernel) -> f64 {
    h.chunks_exact(d)
        .map(|row| kernel.s(dot(lambda, row)))
        .sum()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inner_newton(h: &[f64], n: usize, d: usize, kernel: &GelKernel) -> InnerSolution {
    let mut lambda = vec![0.0; d];
    let mut value = n as f64 * kernel.s(0.0);
    let mut decrements = Vec::new();
    let mut grad = vec![0.0; d];
    let mut hess = Array2::<f64>::zeros((d, d));
    let mut converged = false;
    let mut iterations = 0;

    while iterations < INNER_MAX_ITER {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.fill(0.0);
        for row in h.chunks_exact(d) {
            let v = dot(&lambda, row);
            let (s1, s2) = (kernel.s1(v), kernel.s2(v));
            for a in 0..d {
                grad[a] += s1 * row[a];
                for b in 0..=a {
                    // accumulate -H so the system is positive definite
                    hess[[a, b]] -= s2 * row[a] * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[[b, a]] = hess[[a, b]];
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= INNER_GRAD_TOL * n as f64 {
            converged = true;
            break;
        }
        let Ok(chol) = Cholesky::new_with_ridge(hess.view(), RIDGE_RETRIES) else {
            break;
        };
        let step = chol.solve(&grad);
        let decrement = dot(&grad, &step);
        decrements.push(decrement);
        if !(decrement > 1e-24 * (1.0 + value.abs())) {
            // at the round-off floor of the objective
            converged = decrement.is_finite();
            break;
        }

        let mut t: f64 = 1.0;
        if kernel.domain_upper.is_finite() {
            for row in h.chunks_exact(d) {
                let slope = dot(&step, row);
                if slope > 0.0 {
                    let room = kernel.domain_upper - dot(&lambda, row);
                    t = t.min(0.99 * room / slope);
                }
            }
        }
        let mut accepted = false;
        let mut trial = vec![0.0; d];
        for _ in 0..60 {
            for a in 0..d {
                trial[a] = lambda[a] + t * step[a];
            }
            let v = inner_value(h, d, &trial, kernel);
            if v.is_finite() && v >= value + 1e-4 * t * decrement {
                lambda.copy_from_slice(&trial);
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }

    InnerSolution {
        lambda,
        value,
        converged,
        iterations,
        decrements,
    }
}

/// GEL estimate: minimises the inner supremum over the parameter box and
/// reports `T = 2 (Q(theta_hat) - n s(0))`.
pub fn gel_estimate(
    model: &dyn MomentModel,
    data: &Sample,
    kernel: &GelKernel,
    weights: Option<&[f64]>,
) -> Result<EstimationResult> {
    gel_estimate_opts(model, data, kernel, weights, &OptimOptions::default())
}

pub fn gel_estimate_opts(
    model: &dyn MomentModel,
    data: &Sample,
    kernel: &GelKernel,
    weights: Option<&[f64]>,
    optim: &OptimOptions,
) -> Result<EstimationResult> {
    check_model(model, data)?;
    check_weights(data, weights)?;
    Ok(gel_fit(model, data, kernel, weights, optim))
}

pub(crate) fn gel_fit(
    model: &dyn MomentModel,
    data: &Sample,
    kernel: &GelKernel,
    weights: Option<&[f64]>,
    optim: &OptimOptions,
) -> EstimationResult {
    let (n, d) = (data.n(), model.moment_dim());
    let outer = |theta: &[f64]| {
        let h = weighted_rows(model, data, theta, weights);
        inner_newton(&h, n, d, kernel).value
    };
    let m = minimize_box(outer, model.theta_bounds(), optim);
    let h = weighted_rows(model, data, &m.x, weights);
    let inner = inner_newton(&h, n, d, kernel);
    let base = n as f64 * kernel.s(0.0);
    EstimationResult {
        mst_stat: 2.0 * (inner.value - base),
        objective_value: inner.value,
        theta_hat: m.x,
        converged: m.converged && inner.converged,
        iterations: m.iterations,
    }
}
