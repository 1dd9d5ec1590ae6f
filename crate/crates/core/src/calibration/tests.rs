use super::*;
use crate::features::{business_days, PriceSeries, Series};
use crate::synthetic::{synthetic_dataset, SyntheticConfig};
use approx::assert_relative_eq;
use rand_distr::StandardNormal;

fn design_rows(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r1 = (0..n).map(|_| 0.02 * rng.sample::<f64, _>(StandardNormal)).collect();
    let q = (0..n).map(|_| 0.01 + 0.01 * rng.random::<f64>()).collect();
    (r1, q)
}

#[test]
fn exact_fit_recovers_betas() {
    let (r1, q) = design_rows(200, 1);
    let b = Betas::new(0.04, -0.1, 0.6);
    let y: Vec<f64> = r1.iter().zip(&q).map(|(&a, &c)| b.sigma_from_sqrt(a, c)).collect();
    let fit = fit_betas(&r1, &q, &y, &BetaBounds::default(), 0.0, true).unwrap();
    assert!((fit.betas.b0 - 0.04).abs() < 1e-10);
    assert!((fit.betas.b1 + 0.1).abs() < 1e-10);
    assert!((fit.betas.b2 - 0.6).abs() < 1e-10);
    assert!(!fit.active());
    assert!(fit.mse < 1e-20);
}

#[test]
fn huge_ridge_sends_betas_to_zero() {
    let (r1, q) = design_rows(100, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..100).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let fit = fit_betas(&r1, &q, &y, &BetaBounds::unbounded(), 1e12, true).unwrap();
    for b in fit.betas.to_array() {
        assert!(b.abs() < 1e-9, "{b}");
    }
}

#[test]
fn negative_beta2_is_clamped() {
    let (r1, q) = design_rows(100, 4);
    let y: Vec<f64> = r1.iter().zip(&q).map(|(&a, &c)| 0.3 - 0.2 * a - 5.0 * c).collect();
    let fit = fit_betas(&r1, &q, &y, &BetaBounds::default(), 0.0, true).unwrap();
    assert_eq!(fit.betas.b2, 0.0);
    assert_eq!(fit.state[2], BoundState::AtLower);
    assert!(fit.active());
}

#[test]
fn rejects_bad_inputs() {
    let b = BetaBounds::default();
    assert!(fit_betas(&[0.0; 2], &[0.0; 2], &[0.0; 2], &b, 0.0, true).is_err());
    assert!(fit_betas(&[0.0; 3], &[0.0; 3], &[0.0, f64::NAN, 0.0], &b, 0.0, true).is_err());
    assert!(fit_betas(&[0.0; 3], &[0.0; 3], &[0.0; 3], &b, -1.0, true).is_err());
    let empty = BetaBounds { lower: [1.0, 0.0, 0.0], upper: [0.0, 1.0, 1.0] };
    assert!(fit_betas(&[0.0; 3], &[0.0; 3], &[0.0; 3], &empty, 0.0, true).is_err());
}

#[test]
fn constant_features_flag_rank_deficiency() {
    let y = vec![0.2; 10];
    let fit = fit_betas(&[0.0; 10], &[0.0; 10], &y, &BetaBounds::default(), 0.0, true).unwrap();
    assert!(fit.mse < 1e-24);
    assert_relative_eq!(fit.betas.b0, 0.2, epsilon = 1e-12);
}

#[test]
fn scale_equivariance() {
    let (r1, q) = design_rows(150, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y: Vec<f64> = r1
        .iter()
        .zip(&q)
        .map(|(&a, &c)| 0.1 - 2.0 * a + 8.0 * c + 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let bounds = BetaBounds::unbounded();
    let base = fit_betas(&r1, &q, &y, &bounds, 0.0, true).unwrap();
    let scaled: Vec<f64> = y.iter().map(|v| 3.0 * v).collect();
    let fit = fit_betas(&r1, &q, &scaled, &bounds, 0.0, true).unwrap();
    for (a, b) in base.betas.to_array().iter().zip(fit.betas.to_array()) {
        assert_relative_eq!(3.0 * a, b, max_relative = 1e-9);
    }
}

#[test]
fn train_mse_grows_with_ridge() {
    let (r1, q) = design_rows(150, 7);
    let y: Vec<f64> = r1.iter().zip(&q).map(|(&a, &c)| 0.1 - 2.0 * a + 8.0 * c).collect();
    let mut last = -1.0;
    for k in [0.0, 1e-6, 1e-4, 1e-2, 1.0, 100.0] {
        let fit = fit_betas(&r1, &q, &y, &BetaBounds::default(), k, true).unwrap();
        assert!(fit.mse >= last - 1e-15, "kappa {k}: {} < {last}", fit.mse);
        last = fit.mse;
    }
}

#[test]
fn r_squared_conventions() {
    let r = r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
    assert_eq!(r, RSquared { value: 1.0, undefined: false });
    let r = r_squared(&[0.1, 0.3], &[0.2, 0.2]);
    assert_eq!(r, RSquared { value: 0.0, undefined: true });
    let r = r_squared(&[2.0, 2.0], &[1.0, 3.0]);
    assert_relative_eq!(r.value, 0.0);
}

#[test]
fn kernel_choice_parsing_and_domain() {
    for c in KernelChoice::ALL {
        assert_eq!(KernelChoice::parse(c.as_str()).unwrap(), c);
    }
    assert_eq!(KernelChoice::parse("EXP_TSPL").unwrap(), KernelChoice::ExpTspl);
    assert!(KernelChoice::parse("exp").is_err());
    assert!(KernelChoice::ExpExp.kernels(&[-1.0, 2.0]).is_err());
    assert!(KernelChoice::ExpTspl.kernels(&[1.0, 0.9, 0.1]).is_err());
    assert!(KernelChoice::ComboCombo.kernels(&[1.5, 1.0, 2.0, 0.5, 1.0, 2.0]).is_err());
}

#[test]
fn transforms_round_trip() {
    for c in KernelChoice::ALL {
        for p in starting_points::<f64>(&CalibrationSpec::new(c), 9) {
            assert!(c.kernels(&p).is_ok(), "{c} {p:?}");
            let back = c.to_natural(&c.to_search(&p));
            for (a, b) in p.iter().zip(&back) {
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }
}

#[test]
fn halton_points_are_deterministic_and_in_range() {
    let a = halton_points(16, 3, 42);
    assert_eq!(a, halton_points(16, 3, 42));
    assert_ne!(a, halton_points(16, 3, 43));
    assert!(a.iter().flatten().all(|&v| (0.0..1.0).contains(&v)));
}

fn small_dataset(choice: KernelChoice, truth: &[f64], betas: Betas<f64>, noise: f64) -> MarketDataset<f64> {
    let (k1, k2) = choice.kernels(truth).unwrap();
    let cfg = SyntheticConfig { n_days: 1500, proxy_days: 1000, noise, seed: 11, ..Default::default() };
    synthetic_dataset(&k1, &k2, &betas, &cfg).unwrap()
}

#[test]
fn objective_domain_and_degenerate_cases() {
    let ds = small_dataset(KernelChoice::ExpExp, &[20.0, 5.0], Betas::new(0.05, -0.5, 1.0), 0.0);
    let data = CalibrationData::new(&ds).unwrap();
    let spec = CalibrationSpec::new(KernelChoice::ExpExp);
    assert!(objective(&[-1.0, 5.0], &data, &spec).is_infinite());
    assert!(objective(&[0.0, 5.0], &data, &spec).is_infinite());
    assert!(objective(&[20.0, 5.0], &data, &spec) < 1e-20);

    let dates = business_days(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 50);
    let prices = PriceSeries::new(dates.clone(), vec![100.0; 50]).unwrap();
    let proxy = Series::new(dates[1..].to_vec(), vec![0.2; 49]).unwrap();
    let flat = MarketDataset::new(prices, proxy, dates[30]).unwrap();
    let data = CalibrationData::new(&flat).unwrap();
    assert!(objective(&[20.0, 5.0], &data, &spec) < 1e-24);
}

#[test]
fn test_rows_never_enter_the_objective() {
    let ds = small_dataset(KernelChoice::ExpTspl, &[30.0, 1.5, 0.05], Betas::new(0.05, -0.5, 1.0), 0.01);
    let data = CalibrationData::new(&ds).unwrap();
    let mut poisoned = data.clone();
    let first_test = *poisoned.test_rows.iter().min().unwrap();
    for r in &mut poisoned.returns[first_test..] {
        *r = 0.5;
    }
    for y in &mut poisoned.test_target {
        *y = 1e6;
    }
    let spec = CalibrationSpec::new(KernelChoice::ExpTspl);
    for p in [[30.0, 1.5, 0.05], [10.0, 2.0, 0.01]] {
        assert_eq!(objective(&p, &data, &spec).to_bits(), objective(&p, &poisoned, &spec).to_bits());
    }
    assert!(data.train_horizon() <= first_test);
}

#[test]
fn recovers_exp_exp_parameters() {
    let truth = [20.0, 5.0];
    let ds = small_dataset(KernelChoice::ExpExp, &truth, Betas::new(0.05, -0.5, 1.0), 0.0);
    let mut spec = CalibrationSpec::new(KernelChoice::ExpExp);
    spec.multistarts = 4;
    let res = calibrate(&ds, &spec, 3).unwrap();
    assert!(res.r2_train.value >= 0.999, "{}", res.r2_train.value);
    for (p, t) in res.params.iter().zip(truth) {
        assert!((p / t - 1.0).abs() < 0.05, "{:?}", res.params);
    }
    assert!(spec.bounds.contains(&res.betas));
    assert!(res.r2_train.value <= 1.0 && res.r2_test.value <= 1.0);
    assert_eq!(res.positivity.ratio, Some(2.0 * res.params[0] / res.params[1]));
    assert!(res.positivity.pass);
    let again = calibrate(&ds, &spec, 3).unwrap();
    assert_eq!(res, again);
}

#[test]
fn all_failed_starts_is_an_error() {
    let ds = small_dataset(KernelChoice::ExpExp, &[20.0, 5.0], Betas::new(0.05, -0.5, 1.0), 0.0);
    let data = CalibrationData::new(&ds).unwrap();
    let mut spec = CalibrationSpec::new(KernelChoice::ExpExp);
    spec.multistarts = 2;
    spec.bounds = BetaBounds { lower: [0.0, 0.0, 0.0], upper: [0.0, 0.0, 0.0] };
    // feasible box but every evaluation still succeeds; force failure with a
    // dataset too short for any fit
    let mut tiny = data.clone();
    tiny.train_rows.truncate(2);
    tiny.train_target.truncate(2);
    let e = calibrate_prepared(&tiny, &spec, 1, "x").unwrap_err();
    assert!(matches!(e, Error::Calibration(_)), "{e}");
}

#[test]
fn result_round_trips_through_kv() {
    let ds = small_dataset(KernelChoice::ExpTspl, &[30.0, 1.5, 0.05], Betas::new(0.05, -0.5, 1.0), 0.01);
    let data = CalibrationData::new(&ds).unwrap();
    let spec = CalibrationSpec::new(KernelChoice::ExpTspl);
    let trace = OptimizerTrace {
        starts: vec![StartTrace {
            initial: vec![1.0, 2.0, 0.1],
            value: 0.5,
            iterations: 3,
            evaluations: 7,
            converged: false,
        }],
        best_start: 0,
    };
    let res = evaluate_params(&data, &spec, vec![30.0, 1.5, 0.05], trace, "synthetic").unwrap();
    let back = CalibrationResult::<f64>::from_kv(&res.to_kv()).unwrap();
    assert_eq!(res, back);
    assert_relative_eq!(res.positivity.ratio.unwrap(), 2.0 * 30.0 * 0.05 / 1.5, max_relative = 1e-12);
    assert!(CalibrationResult::<f64>::from_kv("choice=exp/exp\n").is_err());
}

#[test]
fn report_layouts() {
    let ds = small_dataset(KernelChoice::ExpTspl, &[30.0, 1.5, 0.05], Betas::new(0.05, -0.5, 1.0), 0.01);
    let data = CalibrationData::new(&ds).unwrap();
    let trace = OptimizerTrace { starts: vec![], best_start: 0 };
    let one = evaluate_params(&data, &CalibrationSpec::new(KernelChoice::ExpExp), vec![20.0, 5.0], trace.clone(), "A")
        .unwrap();
    let table = render_report(std::slice::from_ref(&one));
    assert_eq!(table.text.lines().count(), 3);
    assert_eq!(table.csv.lines().count(), 2);

    let mut all = Vec::new();
    let params: [&[f64]; 4] =
        [&[20.0, 5.0], &[1.5, 0.05, 1.5, 0.05], &[0.5, 50.0, 5.0, 0.5, 50.0, 5.0], &[30.0, 1.5, 0.05]];
    for (c, p) in KernelChoice::ALL.into_iter().zip(params) {
        for label in ["A", "B"] {
            all.push(evaluate_params(&data, &CalibrationSpec::new(c), p.to_vec(), trace.clone(), label).unwrap());
        }
    }
    let table = render_report(&all);
    let lines: Vec<&str> = table.text.lines().collect();
    assert_eq!(lines.len(), 1 + 1 + 4 + 1);
    assert!(lines[1].contains("A train") && lines[1].contains("B test"));
    assert!(lines[6].starts_with("2λδ/α"));
    assert!(lines[6].contains("2.00 PASS"));
    assert_eq!(table.csv.lines().count(), 1 + 8);
    let exp_tspl = table.csv.lines().find(|l| l.starts_with("exp/tspl,A")).unwrap();
    assert!(exp_tspl.contains(",2.0"));
}
