//! Moment models `E g(X, theta0) = 0`: the dynamic-panel moments in first
//! differences, conditional moments expanded on a B-spline basis, and a
//! closure-backed model for ad hoc use.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{dim_err, Error, Result};
use crate::stats::Sample;
use crate::weights::RngState;

/// A vector of moment functions indexed by a low-dimensional parameter.
///
/// Implementations must be reentrant: bootstrap replicates evaluate the
/// same model concurrently.
pub trait MomentModel: Send + Sync {
    /// `d`, the number of moment conditions.
    fn moment_dim(&self) -> usize;
    /// `q`, the parameter dimension.
    fn param_dim(&self) -> usize;
    fn theta_bounds(&self) -> &[(f64, f64)];
    /// Number of columns an observation must have, if fixed.
    fn obs_dim(&self) -> Option<usize> {
        None
    }
    /// Writes `g(obs, theta)` into `out` (length `d`).
    fn moments(&self, obs: &[f64], theta: &[f64], out: &mut [f64]);
}

pub(crate) fn check_model(model: &dyn MomentModel, data: &Sample) -> Result<()> {
    let (q, d) = (model.param_dim(), model.moment_dim());
    if q == 0 || d < q {
        return Err(Error::InvalidArgument(format!(
            "moment model needs 1 <= q <= d, got q={q}, d={d}"
        )));
    }
    let bounds = model.theta_bounds();
    if bounds.len() != q {
        return Err(dim_err(format!("{q} parameter bounds"), bounds.len()));
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("empty parameter box [{lo}, {hi}]")));
    }
    if let Some(p) = model.obs_dim() {
        if data.d() != p {
            return Err(dim_err(format!("{p} columns per observation"), data.d()));
        }
    }
    Ok(())
}

/// `n x d` matrix whose row `i` is `g(X_i, theta)`.
pub fn moment_matrix(model: &dyn MomentModel, data: &Sample, theta: &[f64]) -> Result<Array2<f64>> {
    check_model(model, data)?;
    if theta.len() != model.param_dim() {
        return Err(dim_err(model.param_dim(), theta.len()));
    }
    let d = model.moment_dim();
    let buf = moment_rows(model, data, theta);
    Ok(Array2::from_shape_vec((data.n(), d), buf).expect("shape matches"))
}

/// Row-major moment matrix without validation.
pub(crate) fn moment_rows(model: &dyn MomentModel, data: &Sample, theta: &[f64]) -> Vec<f64> {
    let d = model.moment_dim();
    let mut buf = vec![0.0; data.n() * d];
    for (row, out) in data.rows().zip(buf.chunks_exact_mut(d)) {
        model.moments(row, theta, out);
    }
    buf
}

/// Closure-backed moment model.
#[derive(Clone)]
pub struct FnModel {
    q: usize,
    d: usize,
    bounds: Vec<(f64, f64)>,
    g: Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>,
}

impl FnModel {
    pub fn new<F>(q: usize, d: usize, bounds: Vec<(f64, f64)>, g: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            q,
            d,
            bounds,
            g: Arc::new(g),
        }
    }
}

impl std::fmt::Debug for FnModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnModel")
            .field("q", &self.q)
            .field("d", &self.d)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl MomentModel for FnModel {
    fn moment_dim(&self) -> usize {
        self.d
    }
    fn param_dim(&self) -> usize {
        self.q
    }
    fn theta_bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn moments(&self, obs: &[f64], theta: &[f64], out: &mut [f64]) {
        (self.g)(obs, theta, out)
    }
}

/// First-differenced AR(1) panel moments
/// `((y_t - y_{t-1}) - theta (y_{t-1} - y_{t-2})) y_{t-s}`, `t = 3..T`,
/// for every lag `s >= 2` available at `t`.
///
/// An observation is one unit's series `(y_1, ..., y_T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelArModel {
    periods: usize,
    bounds: Vec<(f64, f64)>,
}

pub const PANEL_THETA_BOUNDS: (f64, f64) = (-1.0, 2.0);

/// The panel AR(1) model for `T` periods; `d = (T-2)(T-1)/2`.
pub fn panel_ab_model(periods: usize) -> Result<PanelArModel> {
    if periods < 3 {
        return Err(Error::InvalidArgument(format!(
            "panel model needs T >= 3 periods, got {periods}"
        )));
    }
    Ok(PanelArModel {
        periods,
        bounds: vec![PANEL_THETA_BOUNDS],
    })
}

impl PanelArModel {
    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = vec![(lo, hi)];
        self
    }
}

impl MomentModel for PanelArModel {
    fn moment_dim(&self) -> usize {
        (self.periods - 2) * (self.periods - 1) / 2
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn theta_bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn obs_dim(&self) -> Option<usize> {
        Some(self.periods)
    }
    fn moments(&self, y: &[f64], theta: &[f64], out: &mut [f64]) {
        // y[t-1] holds y_t
        let mut k = 0;
        for t in 3..=self.periods {
            let resid = (y[t - 1] - y[t - 2]) - theta[0] * (y[t - 2] - y[t - 3]);
            for s in 2..t {
                out[k] = resid * y[t - 1 - s];
                k += 1;
            }
        }
    }
}

/// Panel data-generating process
/// `y_t = (1 - a1 - a2) mu_i + a1 y_{t-1} + a2 y_{t-2} + e_t`,
/// `e_t = eps_t + m1 eps_{t-1}`, with `mu_i, eps_t ~ N(0, 1)`.
///
/// The moments of [`PanelArModel`] hold at `theta = a1` exactly when
/// `a2 = m1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelDesign {
    pub ar1: f64,
    pub ar2: f64,
    pub ma1: f64,
    pub fe_sd: f64,
}

impl PanelDesign {
    pub fn ar1(theta: f64) -> Self {
        Self {
            ar1: theta,
            ar2: 0.0,
            ma1: 0.0,
            fe_sd: 1.0,
        }
    }
}

const PANEL_BURN_IN: usize = 50;

/// `n` units observed over `periods` periods. Each unit starts at its
/// long-run mean and runs a burn-in before the recorded window.
pub fn simulate_panel(n: usize, periods: usize, design: &PanelDesign, rng: RngState) -> Result<Sample> {
    if n == 0 || periods == 0 {
        return Err(Error::InvalidArgument("panel needs n >= 1 and T >= 1".into()));
    }
    if !(design.ar1.abs() + design.ar2.abs() < 1.0) {
        return Err(Error::InvalidArgument(
            "panel design needs |ar1| + |ar2| < 1 for stationarity".into(),
        ));
    }
    let mut g = rng.generator();
    let mut values = Vec::with_capacity(n * periods);
    let drift = 1.0 - design.ar1 - design.ar2;
    for _ in 0..n {
        let mu: f64 = design.fe_sd * g.sample::<f64, _>(StandardNormal);
        let (mut y1, mut y2) = (mu, mu);
        let mut eps_prev: f64 = g.sample(StandardNormal);
        for t in 0..PANEL_BURN_IN + periods {
            let eps: f64 = g.sample(StandardNormal);
            let y = drift * mu + design.ar1 * y1 + design.ar2 * y2 + eps + design.ma1 * eps_prev;
            eps_prev = eps;
            y2 = y1;
            y1 = y;
            if t >= PANEL_BURN_IN {
                values.push(y);
            }
        }
    }
    Sample::new(Array2::from_shape_vec((n, periods), values).expect("shape matches"))
}

/// Clamped B-spline basis on equally spaced knots over `[lo, hi]`.
///
/// Degree is 2 when `K >= 3`, otherwise `K - 1`; `K = 1` is the constant
/// function. Arguments outside the range are clamped to it.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    size: usize,
    degree: usize,
    knots: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl BSplineBasis {
    pub fn new(size: usize, lo: f64, hi: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("spline basis needs K >= 1".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spline range [{lo}, {hi}] is empty or not finite"
            )));
        }
        let degree = (size - 1).min(2);
        let interior = size - degree - 1;
        let mut knots = vec![lo; degree + 1];
        for k in 1..=interior {
            knots.push(lo + (hi - lo) * k as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        Ok(Self {
            size,
            degree,
            knots,
            lo,
            hi,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Writes all `K` basis values at `w` into `out`.
    pub fn eval_into(&self, w: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let p = self.degree;
        let x = w.clamp(self.lo, self.hi);
        // knot span with knots[span] <= x < knots[span+1], last span closed
        let mut span = p;
        while span + 1 < self.size && x >= self.knots[span + 1] {
            span += 1;
        }
        let mut basis = [0.0f64; 3];
        let mut left = [0.0f64; 3];
        let mut right = [0.0f64; 3];
        basis[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = basis[r] / (right[r + 1] + left[j - r]);
                basis[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            basis[j] = saved;
        }
        for (j, b) in basis.iter().take(p + 1).enumerate() {
            out[span - p + j] = *b;
        }
    }

    pub fn eval(&self, w: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        self.eval_into(w, &mut out);
        out
    }
}

/// Residual function `rho(obs, theta)` with `J` components.
#[derive(Clone)]
pub struct Residual {
    dim: usize,
    f: Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>,
}

impl Residual {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { dim, f: Arc::new(f) }
    }

    /// `rho = y - x' theta` for observations laid out as `(y, x_1..x_q, ...)`.
    pub fn linear(q: usize) -> Self {
        Self::new(1, move |obs, theta, out| {
            let fit: f64 = (0..q).map(|j| obs[1 + j] * theta[j]).sum();
            out[0] = obs[0] - fit;
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl std::fmt::Debug for Residual {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Residual").field("dim", &self.dim).finish()
    }
}

/// `g(x, theta) = rho(x, theta) (x) q^K(w)`, component `j*K + k` being
/// `rho_j * basis_k(w)`.
#[derive(Debug, Clone)]
pub struct ConditionalSplineModel {
    rho: Residual,
    basis: BSplineBasis,
    w_col: usize,
    q: usize,
    bounds: Vec<(f64, f64)>,
}

/// Spline-expanded conditional moment model. The basis spans the empirical
/// range of column `w_col` of `data`.
pub fn conditional_spline_model(
    rho: Residual,
    k: usize,
    data: &Sample,
    w_col: usize,
    bounds: Vec<(f64, f64)>,
) -> Result<ConditionalSplineModel> {
    if k == 0 {
        return Err(Error::InvalidArgument("spline model needs K >= 1".into()));
    }
    if w_col >= data.d() {
        return Err(dim_err(format!("column index < {}", data.d()), w_col));
    }
    let col = data.column(w_col);
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let basis = BSplineBasis::new(k, lo, hi)?;
    Ok(ConditionalSplineModel {
        q: bounds.len(),
        rho,
        basis,
        w_col,
        bounds,
    })
}

impl ConditionalSplineModel {
    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }
}

impl MomentModel for ConditionalSplineModel {
    fn moment_dim(&self) -> usize {
        self.rho.dim * self.basis.len()
    }
    fn param_dim(&self) -> usize {
        self.q
    }
    fn theta_bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn moments(&self, obs: &[f64], theta: &[f64], out: &mut [f64]) {
        let k = self.basis.len();
        let mut r = [0.0f64; 8];
        let mut heap;
        let rho: &mut [f64] = if self.rho.dim <= r.len() {
            &mut r[..self.rho.dim]
        } else {
            heap = vec![0.0; self.rho.dim];
            &mut heap
        };
        (self.rho.f)(obs, theta, rho);
        let (head, tail) = out.split_at_mut(k);
        self.basis.eval_into(obs[self.w_col], head);
        for (j, chunk) in tail.chunks_exact_mut(k).enumerate() {
            for (c, b) in chunk.iter_mut().zip(head.iter()) {
                *c = rho[j + 1] * b;
            }
        }
        for b in head.iter_mut() {
            *b *= rho[0];
        }
    }
}
