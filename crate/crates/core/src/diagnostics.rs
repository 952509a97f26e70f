//! Measurable pieces of the approximation argument: the Gaussian-smoothed
//! ramp used in place of the indicator `1{u >= t}`, the bandwidth that
//! keeps its tails below `eps`, plug-in growth-rate ratios, the Lindeberg
//! swap bound terms and an anti-concentration estimate.

use ndarray::ArrayView3;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{clamp_psd, SymMatrix};
use crate::reference::{normal_cdf, normal_pdf, normal_quantile, weighted_chisq_sample};
use crate::stats::{sample_second_moment, Sample};
use crate::weights::{scheme_moments, RngState, WeightScheme};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothIndicatorParams {
    pub t: f64,
    pub delta: f64,
    pub h: f64,
}

impl SmoothIndicatorParams {
    pub fn new(t: f64, delta: f64, h: f64) -> Result<Self> {
        if !(delta > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "smooth indicator needs delta > 0 and h > 0, got delta={delta}, h={h}"
            )));
        }
        Ok(Self { t, delta, h })
    }
}

/// `1{u >= t} + (u - t + delta)/delta * 1{t - delta < u < t}`.
pub fn ramp_indicator(u: f64, t: f64, delta: f64) -> f64 {
    if u >= t {
        1.0
    } else if u > t - delta {
        (u - t + delta) / delta
    } else {
        0.0
    }
}

/// `E[(m + h Z)_+]` for standard normal `Z`.
fn gaussian_positive_part(m: f64, h: f64) -> f64 {
    let s = m / h;
    m * normal_cdf(s) + h * normal_pdf(s)
}

/// `E[ramp(u + h Z)]`, in closed form.
///
/// The ramp is `((v - t + delta)_+ - (v - t)_+) / delta`, so the convolution
/// reduces to two Gaussian positive-part expectations. Above the ramp
/// midpoint the complementary form `1 - (...)` is used to avoid cancellation.
pub fn smooth_indicator(u: f64, p: &SmoothIndicatorParams) -> f64 {
    let SmoothIndicatorParams { t, delta, h } = *p;
    let v = if u < t - 0.5 * delta {
        (gaussian_positive_part(u - t + delta, h) - gaussian_positive_part(u - t, h)) / delta
    } else {
        1.0 - (gaussian_positive_part(t - u, h) - gaussian_positive_part(t - delta - u, h)) / delta
    };
    v.clamp(0.0, 1.0)
}

/// Largest bandwidth with `Phi(-delta/h) <= eps`: `delta / Phi^{-1}(1 - eps)`.
pub fn h_bound(delta: f64, eps: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 0.5), got {eps}")));
    }
    Ok(delta / normal_quantile(1.0 - eps))
}

/// Plug-in values of the growth-rate conditions on `(n, d)` and the moments
/// of `||Z||`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub n: usize,
    pub d: usize,
    /// `[d (E||Z||_2^3)^2 / n, E||Z||_2^4 / n, d^4 / n]`
    pub ratio_i: [f64; 3],
    /// `d^{2+gamma} / n^gamma * E||Z||_2^{4+2 gamma}`
    pub ratio_ii: f64,
    /// `(log d)^{kappa/2} d^{2+kappa} / n^{1+kappa/2} * E||Z||_{2+kappa}^{2(2+kappa)}`
    pub ratio_iii: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub eig_min: f64,
    pub eig_max: f64,
}

impl AssumptionReport {
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        vec![
            ("n".into(), self.n.to_string()),
            ("d".into(), self.d.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("kappa".into(), self.kappa.to_string()),
            ("ratio_i_third_moment".into(), self.ratio_i[0].to_string()),
            ("ratio_i_fourth_moment".into(), self.ratio_i[1].to_string()),
            ("ratio_i_dimension".into(), self.ratio_i[2].to_string()),
            ("ratio_ii".into(), self.ratio_ii.to_string()),
            ("ratio_iii".into(), self.ratio_iii.to_string()),
            ("eig_min".into(), self.eig_min.to_string()),
            ("eig_max".into(), self.eig_max.to_string()),
        ]
    }
}

pub fn assumption_report(sample: &Sample, gamma: f64, kappa: f64) -> Result<AssumptionReport> {
    if !(gamma >= 0.0) || !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma and kappa must be >= 0, got {gamma}, {kappa}"
        )));
    }
    let n = sample.n() as f64;
    let d = sample.d() as f64;
    let p = 2.0 + kappa;
    let (mut m3, mut m4, mut m_ii, mut m_iii) = (0.0, 0.0, 0.0, 0.0);
    for row in sample.rows() {
        let sq: f64 = row.iter().map(|z| z * z).sum();
        let norm = sq.sqrt();
        m3 += norm * sq;
        m4 += sq * sq;
        m_ii += norm.powf(4.0 + 2.0 * gamma);
        // ||z||_p^{2p} = (sum |z_l|^p)^2
        let lp: f64 = row.iter().map(|z| z.abs().powf(p)).sum();
        m_iii += lp * lp;
    }
    let (m3, m4, m_ii, m_iii) = (m3 / n, m4 / n, m_ii / n, m_iii / n);
    let spec = sample_second_moment(sample).eigen();
    Ok(AssumptionReport {
        n: sample.n(),
        d: sample.d(),
        ratio_i: [d * m3 * m3 / n, m4 / n, d.powi(4) / n],
        ratio_ii: d.powf(2.0 + gamma) / n.powf(gamma) * m_ii,
        ratio_iii: d.ln().powf(kappa / 2.0) * d.powf(2.0 + kappa) / n.powf(1.0 + kappa / 2.0) * m_iii,
        gamma,
        kappa,
        eig_min: spec.min(),
        eig_max: spec.max(),
    })
}

/// Whether `scheme` has the finite `max(gamma + 2, 4)`-th moment the theory
/// asks of the multipliers.
pub fn weight_moment_condition(scheme: WeightScheme, gamma: f64) -> bool {
    let q = (gamma + 2.0).max(4.0);
    // only t3 has infinite moments, and only from order 3 upwards
    scheme_moments(scheme).fourth.is_finite() || q < 3.0
}

/// Plug-in bound terms of the one-at-a-time swap between `sum A_i` and
/// `sum B_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindebergBound {
    /// `L2 * sum_i E[||B_i||^4 + ||A_i||^4]`
    pub s1: f64,
    /// `L2 * sqrt(sum_j tr C_j) * sum_i (E||B_i||^3 + E||A_i||^3)`
    pub s2: f64,
    /// Remainder sum with its universal constant set to one.
    pub r: f64,
}

impl LindebergBound {
    /// `S1 + S2 + L2 (L3/L2)^q R`.
    pub fn total(&self, l2: f64, l3: f64, q: f64) -> f64 {
        self.s1 + self.s2 + l2 * (l3 / l2).powf(q) * self.r
    }
}

/// Evaluates the swap bound terms with expectations replaced by averages over
/// replicate draws.
///
/// `a` and `b` have shape `(draws, n, d)`: slice `[r, i, ..]` is the `r`-th
/// draw of `A_i` (resp. `B_i`). The cross term `E[(S_{i:n}' B_i)^{2+q}]`
/// is bounded by `E||B_i||^{2+q} * max{(sum_j E||S_j||^2)^{1+q/2}, sum_j
/// E||S_j||^{2+q}}`, where `S_j = A_j` for `j < i`, `0` for `j = i` and
/// `B_j` for `j > i`.
pub fn lindeberg_terms(
    a: ArrayView3<f64>,
    b: ArrayView3<f64>,
    l2: f64,
    l3: f64,
    q: f64,
) -> Result<LindebergBound> {
    if a.dim() != b.dim() {
        return Err(dim_err(format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    let (m, n, _d) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("need at least one draw and one term".into()));
    }
    if !(l2 > 0.0 && l3 > 0.0 && q > 0.0) {
        return Err(Error::InvalidArgument("L2, L3 and q must be positive".into()));
    }

    // per-term moments E||.||^p for p in {2, 3, 4, 2+q, 4+2q}
    let powers = [2.0, 3.0, 4.0, 2.0 + q, 4.0 + 2.0 * q];
    let moments = |x: &ArrayView3<f64>| -> Vec<[f64; 5]> {
        (0..n)
            .map(|i| {
                let mut acc = [0.0; 5];
                for r in 0..m {
                    let sq: f64 = x.slice(ndarray::s![r, i, ..]).iter().map(|v| v * v).sum();
                    let norm = sq.sqrt();
                    for (k, p) in powers.iter().enumerate() {
                        acc[k] += norm.powf(*p);
                    }
                }
                acc.map(|v| v / m as f64)
            })
            .collect()
    };
    let ma = moments(&a);
    let mb = moments(&b);

    let s1 = l2 * (0..n).map(|i| mb[i][2] + ma[i][2]).sum::<f64>();
    let tr_c: f64 = mb.iter().map(|m| m[0]).sum();
    let s2 = l2 * tr_c.sqrt() * (0..n).map(|i| mb[i][1] + ma[i][1]).sum::<f64>();

    // prefix sums over A (j < i) and suffix sums over B (j > i)
    let mut pre_a2 = vec![0.0; n + 1];
    let mut pre_aq = vec![0.0; n + 1];
    for i in 0..n {
        pre_a2[i + 1] = pre_a2[i] + ma[i][0];
        pre_aq[i + 1] = pre_aq[i] + ma[i][3];
    }
    let mut suf_b2 = vec![0.0; n + 1];
    let mut suf_bq = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suf_b2[i] = suf_b2[i + 1] + mb[i][0];
        suf_bq[i] = suf_bq[i + 1] + mb[i][3];
    }
    let mut r = 0.0;
    for i in 0..n {
        let second = pre_a2[i] + suf_b2[i + 1];
        let higher = pre_aq[i] + suf_bq[i + 1];
        let scale = second.powf(1.0 + 0.5 * q).max(higher);
        r += (mb[i][3] + ma[i][3]) * scale + mb[i][4] + ma[i][4];
    }
    Ok(LindebergBound { s1, s2, r })
}

/// `max_t P(| ||xi||^2 - t | <= gamma sqrt(tr Sigma^2))` for
/// `xi ~ N(0, Sigma)`, estimated from `draws` simulated values with window
/// centres at every 200th order statistic.
pub fn anticoncentration_estimate(sigma: &SymMatrix, gamma: f64, draws: usize, rng: RngState) -> Result<f64> {
    if draws < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "anti-concentration estimate needs at least 10^4 draws, got {draws}"
        )));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {gamma}")));
    }
    let spectrum = clamp_psd(&sigma.eigen().eigenvalues)?;
    let half_width = gamma * sigma.trace_power(2)?.sqrt();
    let mut x = weighted_chisq_sample(&spectrum, draws, rng)?;
    x.sort_by(f64::total_cmp);
    let mut best = 0usize;
    let mut k = 0;
    while k < draws {
        let c = x[k];
        let lo = x.partition_point(|&v| v < c - half_width);
        let hi = x.partition_point(|&v| v <= c + half_width);
        best = best.max(hi - lo);
        k += 200;
    }
    Ok(best as f64 / draws as f64)
}
