use ndarray::Array2;
use proptest::prelude::*;

use qfboot::bootstrap::{bootstrap_distribution, bootstrap_pvalue, bootstrap_quantile, QuantileGrid};
use qfboot::diagnostics::{smooth_indicator, SmoothIndicatorParams};
use qfboot::gmm::{
    gel_estimate, gel_inner_solve, gmm_estimate, kernel, mst_bootstrap_with, FnModel, GelKind, GmmConfig,
    MstMethod, WeightMatrix,
};
use qfboot::linalg::{matrix_sqrt, sym_eigen, trace_power, SymMatrix};
use qfboot::reference::{chisq_cdf, chisq_quantile};
use qfboot::sim::{run_study, DRule, SimConfig, VSpec};
use qfboot::stats::{quadratic_form_stat, sample_second_moment, weighted_quadratic_form_stat, Sample};
use qfboot::weights::{draw_weights, RngState, WeightScheme};

fn sample_strategy(max_n: usize, max_d: usize) -> impl Strategy<Value = Sample> {
    (1..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(-5.0f64..5.0, n * d)
            .prop_map(move |v| Sample::new(Array2::from_shape_vec((n, d), v).unwrap()).unwrap())
    })
}

fn psd_strategy(max_d: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_d).prop_flat_map(|d| {
        prop::collection::vec(-2.0f64..2.0, d * (d + 1)).prop_map(move |v| {
            // A A' with A of shape d x (d + 1)
            let a = Array2::from_shape_vec((d, d + 1), v).unwrap();
            SymMatrix::new(a.dot(&a.t())).unwrap()
        })
    })
}

fn scheme_strategy() -> impl Strategy<Value = WeightScheme> {
    prop::sample::select(WeightScheme::ALL.to_vec())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_weights_reproduce_the_statistic(s in sample_strategy(25, 5)) {
        let w = vec![1.0; s.n()];
        prop_assert!(rel_close(quadratic_form_stat(&s), weighted_quadratic_form_stat(&s, &w).unwrap(), 1e-12));
    }

    #[test]
    fn statistic_ignores_row_order(s in sample_strategy(25, 5), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rows: Vec<Vec<f64>> = s.rows().map(|r| r.to_vec()).collect();
        rows.shuffle(&mut RngState::new(seed, 0, 0).generator());
        let p = Sample::from_rows(&rows).unwrap();
        prop_assert!(rel_close(quadratic_form_stat(&s), quadratic_form_stat(&p), 1e-12));
    }

    #[test]
    fn matrix_sqrt_squares_back(m in psd_strategy(6)) {
        let r = matrix_sqrt(&m).unwrap();
        let sq = r.view().dot(&r.view());
        let scale = m.max_abs().max(1e-300);
        for (x, y) in sq.iter().zip(m.view().iter()) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn trace_power_is_power_sum(m in psd_strategy(6), k in 1u32..=3) {
        let spec = sym_eigen(&m);
        let direct: f64 = spec.eigenvalues.iter().map(|l| l.powi(k as i32)).sum();
        prop_assert!(rel_close(trace_power(&m, k).unwrap(), direct, 1e-9));
        prop_assert!(trace_power(&m, 4).is_err());
    }

    #[test]
    fn eigen_reconstructs_and_is_orthonormal(m in psd_strategy(6)) {
        let spec = sym_eigen(&m);
        let back = spec.reassemble(spec.eigenvalues.iter().copied());
        let scale = m.max_abs();
        for (x, y) in back.view().iter().zip(m.view().iter()) {
            prop_assert!((x - y).abs() <= 1e-9 * scale.max(1e-300));
        }
        let vtv = spec.eigenvectors.t().dot(&spec.eigenvectors);
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((vtv[[i, j]] - target).abs() <= 1e-9);
            }
        }
        prop_assert!(spec.eigenvalues.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }

    #[test]
    fn second_moment_is_psd(s in sample_strategy(25, 6)) {
        let spec = sym_eigen(&sample_second_moment(&s));
        prop_assert!(spec.min() >= -1e-10 * spec.max().abs().max(1e-300));
    }

    #[test]
    fn weights_are_reproducible(scheme in scheme_strategy(), n in 1usize..300, seed in any::<u64>(), stream in any::<u64>()) {
        let rng = RngState::new(seed, stream, 3);
        let a = draw_weights(scheme, n, rng).unwrap();
        let b = draw_weights(scheme, n, rng).unwrap();
        prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert!(a.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn bootstrap_quantiles_are_monotone_and_dual(
        s in sample_strategy(20, 4),
        scheme in scheme_strategy(),
        reps in 1usize..200,
        a1 in 0.01f64..0.99,
        a2 in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        let dist = bootstrap_distribution(&s, scheme, reps, RngState::new(seed, 1, 0)).unwrap();
        let r = dist.replicates();
        prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r.iter().all(|x| x.is_finite() && *x >= 0.0));
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(bootstrap_quantile(&dist, lo).unwrap() <= bootstrap_quantile(&dist, hi).unwrap());
        for a in [lo, hi] {
            let p = bootstrap_pvalue(&dist, bootstrap_quantile(&dist, a).unwrap());
            prop_assert!(p <= 1.0 - a + 2.0 / (reps as f64 + 1.0) + 1e-12);
        }
    }

    #[test]
    fn bootstrap_scales_quadratically(s in sample_strategy(20, 4), c in 0.1f64..10.0, seed in any::<u64>()) {
        let rng = RngState::new(seed, 2, 0);
        let base = bootstrap_distribution(&s, WeightScheme::Gaussian, 50, rng).unwrap();
        let scaled = bootstrap_distribution(&s.scaled(c).unwrap(), WeightScheme::Gaussian, 50, rng).unwrap();
        for (x, y) in base.replicates().iter().zip(scaled.replicates()) {
            prop_assert!(rel_close(c * c * x, *y, 1e-12));
        }
    }

    #[test]
    fn chisq_cdf_and_quantile_are_monotone(d in 1usize..60, x1 in 0.0f64..150.0, x2 in 0.0f64..150.0, a1 in 0.001f64..0.999, a2 in 0.001f64..0.999) {
        let (xl, xh) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        prop_assert!(chisq_cdf(d, xl).unwrap() <= chisq_cdf(d, xh).unwrap());
        let (al, ah) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(chisq_quantile(d, al).unwrap() <= chisq_quantile(d, ah).unwrap());
    }

    #[test]
    fn smooth_indicator_is_a_monotone_probability(
        t in -5.0f64..5.0,
        delta in 0.01f64..3.0,
        h in 0.01f64..3.0,
        u1 in -20.0f64..20.0,
        u2 in -20.0f64..20.0,
    ) {
        let p = SmoothIndicatorParams::new(t, delta, h).unwrap();
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        let (a, b) = (smooth_indicator(lo, &p), smooth_indicator(hi, &p));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(a <= b + 1e-15);
    }

    #[test]
    fn kernels_are_normalized_and_concave(v1 in -3.0f64..0.9, v2 in -3.0f64..0.9, mix in 0.0f64..1.0) {
        for kind in GelKind::ALL {
            let k = kernel(kind);
            prop_assert!((k.s1(0.0) + 1.0).abs() <= 1e-12);
            prop_assert!((k.s2(0.0) + 1.0).abs() <= 1e-12);
            let m = mix * v1 + (1.0 - mix) * v2;
            prop_assert!(k.s(m) >= mix * k.s(v1) + (1.0 - mix) * k.s(v2) - 1e-12);
        }
    }
}

fn mean_model(d: usize) -> FnModel {
    FnModel::new(1, d, vec![(-5.0, 5.0)], move |x, th, out| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = x[j] - th[0] * (1.0 + j as f64);
        }
    })
}

fn data_strategy() -> impl Strategy<Value = Sample> {
    (15usize..60, 1usize..4).prop_flat_map(|(n, d)| {
        prop::collection::vec(-3.0f64..3.0, n * d)
            .prop_map(move |v| Sample::new(Array2::from_shape_vec((n, d), v).unwrap()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn specification_statistics_are_nonnegative(data in data_strategy()) {
        let model = mean_model(data.d());
        for wm in [WeightMatrix::Identity, WeightMatrix::TwoStep] {
            let r = gmm_estimate(&model, &data, &GmmConfig::new(wm)).unwrap();
            prop_assert!(r.mst_stat >= -1e-8);
        }
        for kind in GelKind::ALL {
            let r = gel_estimate(&model, &data, &kernel(kind), None).unwrap();
            prop_assert!(r.mst_stat >= -1e-8);
        }
    }

    #[test]
    fn newton_decrements_never_increase(data in data_strategy(), theta in -0.5f64..0.5) {
        let model = mean_model(data.d());
        for kind in GelKind::ALL {
            let sol = gel_inner_solve(&model, &data, &[theta], &kernel(kind), None).unwrap();
            prop_assert!(sol.decrements.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300));
        }
    }

    #[test]
    fn el_weights_stay_in_domain(data in data_strategy(), theta in -0.5f64..0.5) {
        let model = mean_model(data.d());
        let sol = gel_inner_solve(&model, &data, &[theta], &kernel(GelKind::El), None).unwrap();
        let mut g = vec![0.0; data.d()];
        for row in data.rows() {
            use qfboot::gmm::MomentModel;
            model.moments(row, &[theta], &mut g);
            let v: f64 = sol.lambda.iter().zip(&g).map(|(l, x)| l * x).sum();
            prop_assert!(1.0 - v > 0.0);
        }
    }

    #[test]
    fn unit_multipliers_collapse_to_the_statistic(data in data_strategy()) {
        let model = mean_model(data.d());
        let grid = QuantileGrid::default();
        let n = data.n();
        let methods = [
            MstMethod::Gmm(GmmConfig::new(WeightMatrix::TwoStep)),
            MstMethod::Gel(kernel(GelKind::Cue)),
        ];
        for method in &methods {
            let r = mst_bootstrap_with(&model, &data, method, 99, &grid, |_| vec![1.0; n]).unwrap();
            prop_assert!(r.replicates.iter().all(|x| (x - r.stat).abs() <= 1e-8 * r.stat.abs().max(1.0)));
            prop_assert_eq!(r.pvalue, 1.0);
        }
    }

    #[test]
    fn just_identified_gmm_fits_exactly(data in data_strategy()) {
        let model = FnModel::new(1, 1, vec![(-5.0, 5.0)], |x, th, out| out[0] = x[0] - th[0]);
        let r = gmm_estimate(&model, &data, &GmmConfig::default()).unwrap();
        prop_assert!(r.objective_value <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn study_sup_matches_levels(n in 20usize..80, d in 1usize..4, eps in 0.0f64..10.0, seed in any::<u64>()) {
        let cfg = SimConfig {
            n,
            d_rule: DRule::Fixed(d),
            v_spec: VSpec::Inflate(eps),
            mc_reps: 15,
            boot_reps: 25,
            seed,
            ..SimConfig::default()
        };
        let r = run_study(&cfg).unwrap();
        prop_assert_eq!(r.kb, r.per_level_errors.iter().copied().fold(0.0, f64::max));
        prop_assert_eq!(r.k_chisq, r.per_level_errors_chisq.iter().copied().fold(0.0, f64::max));
        prop_assert!(r.per_level_errors.iter().chain(&r.per_level_errors_chisq).all(|e| (0.0..=1.0).contains(e)));
    }

    #[test]
    fn config_text_round_trips(n in 1usize..5000, d in 1usize..50, reps in 1usize..1000, seed in any::<u64>(), eps in 0.0f64..30.0, scheme in scheme_strategy()) {
        let cfg = SimConfig {
            n,
            d_rule: DRule::Fixed(d),
            v_spec: VSpec::Inflate(eps),
            scheme,
            mc_reps: reps,
            boot_reps: reps + 1,
            seed,
            ..SimConfig::default()
        };
        prop_assert_eq!(SimConfig::parse(&cfg.to_config_string()).unwrap(), cfg);
    }
}
