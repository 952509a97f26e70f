//! One Monte Carlo experiment: simulate, bootstrap, and measure coverage
//! errors of bootstrap and chi-square critical values.

use std::io::Write;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use super::config::{SimConfig, VSpec};
use crate::bootstrap::{bootstrap_replicates_seq, coverage_errors, order_index};
use crate::error::Result;
use crate::linalg::SymMatrix;
use crate::reference::chisq_quantile;
use crate::stats::{quadratic_form_stat, Sample};
use crate::weights::RngState;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub n: usize,
    pub d: usize,
    pub levels: Vec<f64>,
    /// `max_a |P(Q >= t^B(a)) - (1 - a)|`.
    pub kb: f64,
    /// Same with chi-square(d) critical values.
    pub k_chisq: f64,
    pub per_level_errors: Vec<f64>,
    pub per_level_errors_chisq: Vec<f64>,
    /// Binomial standard error `sqrt(a (1 - a) / R)` per level.
    pub stderr: Vec<f64>,
    pub mc_reps: usize,
    pub boot_reps: usize,
    pub runtime: Duration,
}

impl StudyResult {
    /// Largest per-level standard error.
    pub fn noise_band(&self) -> f64 {
        self.stderr.iter().copied().fold(0.0, f64::max)
    }
}

/// `V^{1/2}` as a scalar when `V` is a multiple of the identity.
enum RootV {
    Scalar(f64),
    Matrix(SymMatrix),
}

fn root_v(config: &SimConfig) -> Result<RootV> {
    Ok(match &config.v_spec {
        VSpec::Identity => RootV::Scalar(1.0),
        VSpec::Inflate(eps) => RootV::Scalar((1.0 + eps / (config.n as f64).sqrt()).sqrt()),
        VSpec::User(m) => RootV::Matrix(m.sqrt()?),
    })
}

/// Replication `rep` of the design: rows `V^{1/2} sqrt(12) u` with
/// `u ~ U(-1/2, 1/2)^d`, drawn from stream `(seed, rep, 0)`.
pub fn dgp_draw(config: &SimConfig, rep: u64) -> Result<Sample> {
    config.validate()?;
    draw_with(config, &root_v(config)?, rep)
}

fn draw_with(config: &SimConfig, root: &RootV, rep: u64) -> Result<Sample> {
    let (n, d) = (config.n, config.d());
    let mut g = RngState::new(config.seed, rep, 0).generator();
    let s12 = 12f64.sqrt();
    let mut values: Vec<f64> = (0..n * d).map(|_| s12 * (g.random::<f64>() - 0.5)).collect();
    match root {
        RootV::Scalar(c) => {
            if *c != 1.0 {
                values.iter_mut().for_each(|v| *v *= c);
            }
        }
        RootV::Matrix(m) => {
            let mut tmp = vec![0.0; d];
            for row in values.chunks_exact_mut(d) {
                for (i, t) in tmp.iter_mut().enumerate() {
                    *t = (0..d).map(|j| m.get(i, j) * row[j]).sum();
                }
                row.copy_from_slice(&tmp);
            }
        }
    }
    Sample::new(Array2::from_shape_vec((n, d), values).expect("shape matches"))
}

/// Runs `R` replications, each with `B` bootstrap draws. Replication `r`
/// uses stream `(seed, r, .)`: substream 0 for the data and `1..=B` for the
/// multipliers, so results do not depend on scheduling.
pub fn run_study(config: &SimConfig) -> Result<StudyResult> {
    config.validate()?;
    let start = Instant::now();
    let root = root_v(config)?;
    let levels = config.levels.levels().to_vec();
    let d = config.d();

    let per_rep: Vec<(f64, Vec<f64>)> = (0..config.mc_reps as u64)
        .into_par_iter()
        .map(|r| -> Result<(f64, Vec<f64>)> {
            let sample = draw_with(config, &root, r)?;
            let q = quadratic_form_stat(&sample);
            let reps = bootstrap_replicates_seq(
                &sample,
                config.scheme,
                config.boot_reps,
                RngState::new(config.seed, r, 0),
            );
            let t = levels
                .iter()
                .map(|&a| reps[order_index(a, reps.len())])
                .collect();
            Ok((q, t))
        })
        .collect::<Result<_>>()?;

    let (stats, boot_q): (Vec<f64>, Vec<Vec<f64>>) = per_rep.into_iter().unzip();
    let chi: Vec<f64> = levels
        .iter()
        .map(|&a| chisq_quantile(d, a))
        .collect::<Result<_>>()?;
    let chi_q = vec![chi; stats.len()];
    let per_level_errors = coverage_errors(&stats, &boot_q, &config.levels)?;
    let per_level_errors_chisq = coverage_errors(&stats, &chi_q, &config.levels)?;
    let r = config.mc_reps as f64;
    Ok(StudyResult {
        n: config.n,
        d,
        kb: per_level_errors.iter().copied().fold(0.0, f64::max),
        k_chisq: per_level_errors_chisq.iter().copied().fold(0.0, f64::max),
        stderr: levels.iter().map(|a| (a * (1.0 - a) / r).sqrt()).collect(),
        levels,
        per_level_errors,
        per_level_errors_chisq,
        mc_reps: config.mc_reps,
        boot_reps: config.boot_reps,
        runtime: start.elapsed(),
    })
}

/// Writes a study as CSV: one row per level and a final `sup` row. Runtime
/// is left out so reruns produce identical bytes.
pub fn write_study_csv<W: Write>(config: &SimConfig, result: &StudyResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n", "d", "v", "scheme", "mc_reps", "boot_reps", "seed", "level", "boot_error", "chisq_error",
        "stderr",
    ])?;
    let prefix = [
        result.n.to_string(),
        result.d.to_string(),
        config.v_spec.to_string(),
        config.scheme.to_string(),
        result.mc_reps.to_string(),
        result.boot_reps.to_string(),
        config.seed.to_string(),
    ];
    for k in 0..result.levels.len() {
        let mut rec = prefix.to_vec();
        rec.extend([
            result.levels[k].to_string(),
            result.per_level_errors[k].to_string(),
            result.per_level_errors_chisq[k].to_string(),
            result.stderr[k].to_string(),
        ]);
        w.write_record(&rec)?;
    }
    let mut rec = prefix.to_vec();
    rec.extend([
        "sup".to_string(),
        result.kb.to_string(),
        result.k_chisq.to_string(),
        result.noise_band().to_string(),
    ]);
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

/// `log(K / K^B)`; `+inf` when `K^B = 0 < K`, and `0` when both vanish.
pub fn log_ratio(k_chisq: f64, kb: f64) -> f64 {
    if kb > 0.0 {
        (k_chisq / kb).ln()
    } else if k_chisq > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

pub const FIGURE1_EPS: [f64; 15] = [
    0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0,
];

/// `(eps, log(K / K^B))` for `V = (1 + eps/sqrt(n)) I`, one study per eps.
pub fn run_figure1(base: &SimConfig, eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    if eps_list.is_empty() {
        return Err(crate::Error::InvalidArgument("eps list is empty".into()));
    }
    eps_list
        .iter()
        .map(|&eps| {
            let cfg = SimConfig {
                v_spec: VSpec::Inflate(eps),
                ..base.clone()
            };
            let r = run_study(&cfg)?;
            Ok((eps, log_ratio(r.k_chisq, r.kb)))
        })
        .collect()
}

pub fn write_figure_csv<W: Write>(rows: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "log_k_over_kb"])?;
    for (eps, v) in rows {
        w.write_record([eps.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
