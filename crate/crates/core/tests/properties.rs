mod common;

use common::*;
use proptest::prelude::*;
use psweight::data::read_csv;
use psweight::diagnostics::{arm_ess, asmd_column};
use psweight::estimators::estimate_from_weights;
use psweight::prelude::*;
use psweight::psmodel::fit_logistic_columns;
use psweight::tilting::{beta_tilt, DEFAULT_SMOOTH_EPSILON};

fn open_unit() -> impl Strategy<Value = f64> {
    (1e-6..1.0 - 1e-6f64).prop_filter("open interval", |e| *e > 0.0 && *e < 1.0)
}

fn any_scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![
        Just(Scheme::Ipw),
        Just(Scheme::IpwTreated),
        Just(Scheme::IpwControls),
        (0.01..0.49f64).prop_map(|alpha| Scheme::Trim { alpha }),
        (0.01..0.49f64, 1e-3..0.5f64)
            .prop_map(|(alpha, epsilon)| Scheme::SmoothTrim { alpha, epsilon }),
        (0.01..0.49f64).prop_map(|alpha| Scheme::Trunc { alpha }),
        Just(Scheme::Matching),
        (1.01..20.0f64).prop_map(|k| Scheme::Trapezoidal { k }),
        Just(Scheme::Overlap),
        Just(Scheme::Entropy),
        (2.0..12.0f64, 2.0..12.0f64).prop_map(|(nu1, nu2)| Scheme::Beta { nu1, nu2 }),
    ]
}

fn any_weight_scheme() -> impl Strategy<Value = WeightScheme> {
    (any_scheme(), 0..3usize).prop_filter_map("class accepts scheme", |(s, c)| {
        WeightScheme::new(EstimandClass::ALL[c], s).ok()
    })
}

proptest! {
    #[test]
    fn tilts_and_unit_weights_are_nonnegative(ws in any_weight_scheme(), e in open_unit()) {
        prop_assert!(ws.tilt(e).unwrap() >= 0.0);
        prop_assert!(ws.unit_weight(e, true).unwrap() >= 0.0);
        prop_assert!(ws.unit_weight(e, false).unwrap() >= 0.0);
    }

    #[test]
    fn equipoise_tilts_are_symmetric(e in open_unit(), nu in 2.0..15.0f64) {
        for s in [Scheme::Matching, Scheme::Overlap, Scheme::Entropy, Scheme::beta(nu)] {
            let w = WeightScheme::new(EstimandClass::Wate, s).unwrap();
            let (l, r) = (w.tilt(e).unwrap(), w.tilt(1.0 - e).unwrap());
            prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(1e-300).max(r.abs()).max(1.0), "{s}: {l} vs {r}");
        }
    }

    #[test]
    fn smooth_trim_approaches_trim(alpha in 0.01..0.49f64, e in open_unit()) {
        prop_assume!((e - alpha).abs() > 1e-3 && (e - (1.0 - alpha)).abs() > 1e-3);
        for class in EstimandClass::ALL {
            let smooth = WeightScheme::new(class, Scheme::SmoothTrim { alpha, epsilon: 1e-4 }).unwrap();
            let hard = WeightScheme::new(class, Scheme::Trim { alpha }).unwrap();
            prop_assert!((smooth.tilt(e).unwrap() - hard.tilt(e).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn owatt_and_owatc_anchored_weights(e in open_unit()) {
        let watt = WeightScheme::new(EstimandClass::Watt, Scheme::Overlap).unwrap();
        let watc = WeightScheme::new(EstimandClass::Watc, Scheme::Overlap).unwrap();
        let c = watt.unit_weight(e, false).unwrap();
        let t = watc.unit_weight(e, true).unwrap();
        prop_assert!((c - e * e).abs() < 1e-15 && c < 1.0);
        prop_assert!((t - (1.0 - e) * (1.0 - e)).abs() < 1e-15 && t < 1.0);
        prop_assert_eq!(watt.unit_weight(e, true).unwrap(), 1.0);
        prop_assert_eq!(watc.unit_weight(e, false).unwrap(), 1.0);
    }

    #[test]
    fn scale_invariance_of_point_estimates(seed in 0u64..1000, c in 1e-3..1e3f64, ws in any_weight_scheme()) {
        let d = random_dataset(seed, 40, 2, false);
        let fit = fit_logistic(&d, &FitOptions::default());
        prop_assume!(fit.is_ok());
        let ps = fit.unwrap().fitted_ps;
        let w = unit_weights(&ws, &ps, d.treatment()).unwrap();
        let base = estimate_from_weights(d.outcome(), d.treatment(), &w, Measure::Rd);
        prop_assume!(base.is_ok());
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let s = estimate_from_weights(d.outcome(), d.treatment(), &scaled, Measure::Rd).unwrap();
        prop_assert!(close(s.estimate, base.unwrap().estimate, 1e-12));
    }

    #[test]
    fn treated_tilt_equals_watt_ipw(seed in 0u64..1000) {
        let d = random_dataset(seed, 30, 2, false);
        let ps = fit_logistic(&d, &FitOptions::default());
        prop_assume!(ps.is_ok());
        let ps = ps.unwrap().fitted_ps;
        let est = |c, s| estimate_point(&d, &ps, &EstimandSpec::difference(WeightScheme::new(c, s).unwrap())).unwrap().estimate;
        prop_assert!(close(est(EstimandClass::Wate, Scheme::IpwTreated), est(EstimandClass::Watt, Scheme::Ipw), 1e-12));
        prop_assert!(close(est(EstimandClass::Wate, Scheme::IpwControls), est(EstimandClass::Watc, Scheme::Ipw), 1e-12));
    }

    #[test]
    fn trimming_equals_subsetting(seed in 0u64..1000, alpha in 0.02..0.3f64) {
        let d = random_dataset(seed, 60, 3, false);
        let fit = fit_logistic(&d, &FitOptions::default());
        prop_assume!(fit.is_ok());
        let ps = fit.unwrap().fitted_ps;
        let keep: Vec<usize> = (0..d.len()).filter(|&i| alpha < ps[i] && ps[i] < 1.0 - alpha).collect();
        let sub = d.select_rows(&keep);
        prop_assume!(sub.is_ok());
        let sub = sub.unwrap();
        let sub_ps: Vec<f64> = keep.iter().map(|&i| ps[i]).collect();
        let trim = EstimandSpec::difference(WeightScheme::new(EstimandClass::Wate, Scheme::Trim { alpha }).unwrap());
        let ipw = EstimandSpec::difference(WeightScheme::new(EstimandClass::Wate, Scheme::Ipw).unwrap());
        let a = estimate_point(&d, &ps, &trim).unwrap().estimate;
        let b = estimate_point(&sub, &sub_ps, &ipw).unwrap().estimate;
        prop_assert!(close(a, b, 1e-12), "{a} vs {b}");
    }

    #[test]
    fn odds_ratio_identity(seed in 0u64..1000, ws in any_weight_scheme()) {
        let d = random_dataset(seed, 50, 2, true);
        let fit = fit_logistic(&d, &FitOptions::default());
        prop_assume!(fit.is_ok());
        let ps = fit.unwrap().fitted_ps;
        let rr = estimate_point(&d, &ps, &EstimandSpec::new(ws, Measure::Rr));
        let or = estimate_point(&d, &ps, &EstimandSpec::new(ws, Measure::Or));
        prop_assume!(rr.is_ok() && or.is_ok());
        let (rr, or) = (rr.unwrap(), or.unwrap());
        let (p1, p0) = (rr.treated_mean, rr.control_mean);
        prop_assert!(close(or.estimate, rr.estimate * (1.0 - p0) / (1.0 - p1), 1e-12));
    }

    #[test]
    fn irls_solves_score_equations(seed in 0u64..1000, n in 30usize..120, p in 1usize..4) {
        let d = random_dataset(seed, n, p, false);
        let fit = fit_logistic(&d, &FitOptions::default());
        prop_assume!(fit.is_ok());
        let fit = fit.unwrap();
        prop_assert!(fit.converged);
        let resid: Vec<f64> = d.treatment().iter().zip(&fit.fitted_ps).map(|(&a, e)| f64::from(u8::from(a)) - e).collect();
        prop_assert!(resid.iter().sum::<f64>().abs() < 1e-6);
        for x in d.covariates() {
            prop_assert!(resid.iter().zip(x).map(|(r, x)| r * x).sum::<f64>().abs() < 1e-6);
        }
        for pair in fit.log_likelihood_trace.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-9 * pair[0].abs());
        }
    }

    #[test]
    fn fitted_ps_is_affine_invariant(seed in 0u64..1000, scale in prop_oneof![-50.0..-0.02f64, 0.02..50.0f64], shift in -100.0..100.0f64, j in 0usize..2) {
        let d = random_dataset(seed, 60, 2, false);
        let a = d.treatment();
        let opts = FitOptions::default();
        let base = fit_logistic_columns(d.covariates(), a, &opts, None);
        prop_assume!(base.is_ok());
        let mut cols = d.covariates().to_vec();
        cols[j] = cols[j].iter().map(|x| scale * x + shift).collect();
        let moved = fit_logistic_columns(&cols, a, &opts, None).unwrap();
        for (x, y) in base.unwrap().fitted_ps.iter().zip(&moved.fitted_ps) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn csv_round_trip_is_value_identical(seed in 0u64..10_000, binary in any::<bool>()) {
        let d = random_dataset(seed, 25, 3, binary);
        let names: Vec<&str> = d.covariate_names().iter().map(String::as_str).collect();
        let mut mapping = ColumnMapping::new("A", "Y", &names);
        if binary {
            mapping = mapping.binary();
        }
        let mut buf = Vec::new();
        d.write_csv(&mut buf, &mapping).unwrap();
        let back = read_csv(buf.as_slice(), &mapping).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert!(back.validate().is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ess_of_equal_weights_is_n(n in 1usize..500, w in 1e-6..1e6f64) {
        let v = ess(&vec![w; n]).unwrap();
        prop_assert!((v - n as f64).abs() < 1e-9 * n as f64);
    }

    #[test]
    fn ess_scale_invariance_and_bound(w in prop::collection::vec(0.0..10.0f64, 1..200), c in 1e-3..1e3f64) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let base = ess(&w).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        prop_assert!(close(ess(&scaled).unwrap(), base, 1e-10));
        let positive = w.iter().filter(|&&x| x > 0.0).count() as f64;
        prop_assert!(base <= positive * (1.0 + 1e-12));
    }

    #[test]
    fn asmd_affine_invariance(
        x in prop::collection::vec(-100.0..100.0f64, 8..60),
        seed in any::<u64>(),
        scale in prop_oneof![-20.0..-0.05f64, 0.05..20.0f64],
        shift in -1e3..1e3f64,
    ) {
        let treated: Vec<bool> = (0..x.len()).map(|i| (seed >> (i % 64)) & 1 == 1 || i < 2).collect();
        let mut treated = treated;
        treated[2] = false;
        treated[3] = false;
        let w: Vec<f64> = (0..x.len()).map(|i| 0.5 + ((seed.rotate_left(i as u32) % 7) as f64)).collect();
        let base = asmd_column(&x, &treated, &w).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let after = asmd_column(&moved, &treated, &w).unwrap();
        match (base, after) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-10 * a.max(1.0), "{a} vs {b}"),
            (None, None) => {}
            other => prop_assert!(false, "definedness changed: {other:?}"),
        }
    }

    #[test]
    fn anchored_arm_ess_is_arm_size(
        ps in prop::collection::vec(0.01..0.99f64, 4..100),
        bits in any::<u128>(),
        ws in any_weight_scheme(),
    ) {
        let mut treated: Vec<bool> = (0..ps.len()).map(|i| (bits >> (i % 128)) & 1 == 1).collect();
        treated[0] = true;
        treated[1] = false;
        let w = unit_weights(&ws, &ps, &treated).unwrap();
        let row = arm_ess(&treated, &w);
        prop_assume!(row.is_ok());
        let row = row.unwrap();
        let n1 = treated.iter().filter(|&&t| t).count() as f64;
        let n0 = ps.len() as f64 - n1;
        match ws.class() {
            EstimandClass::Watt => prop_assert_eq!(row.treated, n1),
            EstimandClass::Watc => prop_assert_eq!(row.control, n0),
            EstimandClass::Wate => {}
        }
        prop_assert!(row.treated <= n1 * (1.0 + 1e-12) && row.control <= n0 * (1.0 + 1e-12));
    }
}

#[test]
fn beta_special_cases_pointwise() {
    let ow = WeightScheme::new(EstimandClass::Wate, Scheme::Overlap).unwrap();
    let ipw = WeightScheme::new(EstimandClass::Wate, Scheme::Ipw).unwrap();
    let treated = WeightScheme::new(EstimandClass::Wate, Scheme::IpwTreated).unwrap();
    let controls = WeightScheme::new(EstimandClass::Wate, Scheme::IpwControls).unwrap();
    let bw22 = WeightScheme::new(EstimandClass::Wate, Scheme::beta(2.0)).unwrap();
    for i in 1..1000 {
        let e = i as f64 / 1000.0;
        assert_eq!(bw22.tilt(e).unwrap(), ow.tilt(e).unwrap());
        assert_eq!(beta_tilt(e, 1.0, 1.0), ipw.tilt(e).unwrap());
        assert_eq!(beta_tilt(e, 2.0, 1.0), treated.tilt(e).unwrap());
        assert_eq!(beta_tilt(e, 1.0, 2.0), controls.tilt(e).unwrap());
    }
}

#[test]
fn truncation_weight_caps() {
    for alpha in [0.05, 0.1, 0.15, 0.3] {
        let wate = WeightScheme::new(EstimandClass::Wate, Scheme::Trunc { alpha }).unwrap();
        let watt = WeightScheme::new(EstimandClass::Watt, Scheme::Trunc { alpha }).unwrap();
        let (mut wate_max, mut watt_max) = (0f64, 0f64);
        for i in 1..100_000 {
            let e = i as f64 / 100_000.0;
            wate_max = wate_max
                .max(wate.unit_weight(e, true).unwrap())
                .max(wate.unit_weight(e, false).unwrap());
            watt_max = watt_max.max(watt.unit_weight(e, false).unwrap());
        }
        assert!(wate_max <= 1.0 / alpha * (1.0 + 1e-12));
        assert!((wate_max - 1.0 / alpha).abs() < 1e-9, "{alpha}: {wate_max}");
        let cap = (1.0 - alpha) / alpha;
        assert!(watt_max <= cap * (1.0 + 1e-12));
        assert!(
            (watt_max - cap).abs() < 1e-3 * cap,
            "{alpha}: {watt_max} vs {cap}"
        );
    }
}

#[test]
fn default_smooth_epsilon() {
    assert_eq!(DEFAULT_SMOOTH_EPSILON, 0.01);
}

#[test]
fn ow_exact_balance_after_irls() {
    for seed in 0..10 {
        let d = random_dataset(seed, 200, 3, false);
        let ps = fit_logistic(&d, &FitOptions::default()).unwrap().fitted_ps;
        let ow = WeightScheme::new(EstimandClass::Wate, Scheme::Overlap).unwrap();
        let w = unit_weights(&ow, &ps, d.treatment()).unwrap();
        for x in d.covariates() {
            let diff = estimate_from_weights(x, d.treatment(), &w, Measure::Rd)
                .unwrap()
                .estimate;
            assert!(diff.abs() < 1e-6, "seed {seed}: {diff}");
        }
    }
}

#[test]
fn quantile_interval_endpoints_are_replicates() {
    let d = random_dataset(3, 50, 2, false);
    let spec =
        EstimandSpec::difference(WeightScheme::new(EstimandClass::Wate, Scheme::Overlap).unwrap());
    let cfg = BootstrapConfig {
        replicates: 41,
        seed: 9,
        ci_method: CiMethod::Quantile,
        ..Default::default()
    };
    let est = bootstrap(&d, &spec, &PsMode::Refit(FitOptions::default()), &cfg).unwrap();
    assert!(est.replicate_estimates.contains(&est.ci_lower));
    assert!(est.replicate_estimates.contains(&est.ci_upper));

    let cfg = BootstrapConfig {
        replicates: 50,
        ..cfg
    };
    let est = bootstrap(&d, &spec, &PsMode::Refit(FitOptions::default()), &cfg).unwrap();
    let mut r = est.replicate_estimates.clone();
    r.sort_by(f64::total_cmp);
    for endpoint in [est.ci_lower, est.ci_upper] {
        let k = r.partition_point(|&v| v < endpoint);
        assert!(k > 0 && k < r.len());
        assert!(r[k - 1] <= endpoint && endpoint <= r[k]);
    }
}

#[test]
fn lognormal_rr_is_exponentiated_log_scale_normal() {
    let d = random_dataset(12, 120, 2, true);
    let spec = EstimandSpec::new(
        WeightScheme::new(EstimandClass::Wate, Scheme::Overlap).unwrap(),
        Measure::Rr,
    );
    let cfg = BootstrapConfig {
        replicates: 60,
        seed: 4,
        ci_method: CiMethod::LogNormal,
        ..Default::default()
    };
    let est = bootstrap(&d, &spec, &PsMode::Refit(FitOptions::default()), &cfg).unwrap();
    let logs: Vec<f64> = est.replicate_estimates.iter().map(|r| r.ln()).collect();
    let m = logs.iter().sum::<f64>() / logs.len() as f64;
    let sd = (logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    let z = 1.959963984540054;
    let (lo, hi) = (
        (est.point.ln() - z * sd).exp(),
        (est.point.ln() + z * sd).exp(),
    );
    assert!(close(est.ci_lower, lo, 1e-12) && close(est.ci_upper, hi, 1e-12));
    assert!(est.ci_lower > 0.0);
}

#[test]
fn bootstrap_is_thread_count_invariant() {
    let d = random_dataset(21, 80, 3, false);
    let specs: Vec<EstimandSpec> = [Scheme::Overlap, Scheme::Ipw, Scheme::Trim { alpha: 0.1 }]
        .iter()
        .map(|&s| EstimandSpec::difference(WeightScheme::new(EstimandClass::Wate, s).unwrap()))
        .collect();
    let run = |threads| {
        let cfg = BootstrapConfig {
            replicates: 60,
            seed: 77,
            threads: Some(threads),
            ..Default::default()
        };
        psweight::inference::bootstrap_many(&d, &specs, &PsMode::Refit(FitOptions::default()), &cfg)
            .unwrap()
    };
    let (one, eight) = (run(1), run(8));
    for (a, b) in one.iter().zip(&eight) {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        assert_eq!(a, b);
        assert_eq!(a.replicate_estimates, b.replicate_estimates);
    }
}
