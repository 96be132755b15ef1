use lpdo_harness::fit::{fit_exponential, DEFAULT_BUDGET};
use lpdo_harness::HarnessError;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn model(a: f64, b: f64, g: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a + b * (-g * v).exp()).collect()
}

#[test]
fn exact_data_is_recovered() {
    let x: Vec<f64> = (0..21).map(f64::from).collect();
    let fit = fit_exponential(&x, &model(1.0, 5.0, 0.4, &x), DEFAULT_BUDGET).unwrap();
    assert!(fit.converged);
    assert!((fit.alpha - 1.0).abs() < 1e-9);
    assert!((fit.beta - 5.0).abs() < 1e-9);
    assert!((fit.gamma - 0.4).abs() < 1e-9);
    assert!(fit.residual_norm < 1e-9);
}

#[test]
fn noisy_data_is_recovered_with_error_bars() {
    let x: Vec<f64> = (0..21).map(f64::from).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let y: Vec<f64> = model(1.0, 5.0, 0.4, &x).into_iter().map(|v| v + noise.sample(&mut rng)).collect();
    let fit = fit_exponential(&x, &y, DEFAULT_BUDGET).unwrap();
    assert!(fit.converged);
    assert!((fit.alpha - 1.0).abs() < 1e-2);
    assert!((fit.beta - 5.0).abs() < 1e-2);
    assert!((fit.gamma - 0.4).abs() < 1e-2);
    for s in [fit.sigma_alpha, fit.sigma_beta, fit.sigma_gamma] {
        assert!(s > 0.0 && s < 1e-2);
    }
}

#[test]
fn constant_data_is_degenerate() {
    let x: Vec<f64> = (0..8).map(f64::from).collect();
    let y = vec![6.0; 8];
    assert!(matches!(fit_exponential(&x, &y, DEFAULT_BUDGET), Err(HarnessError::Degenerate(_))));
}

#[test]
fn exhausted_budget_is_reported() {
    let x: Vec<f64> = (0..21).map(f64::from).collect();
    let fit = fit_exponential(&x, &model(1.0, 5.0, 0.4, &x), 1).unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.iterations, 1);
}

#[test]
fn rising_curve() {
    let x: Vec<f64> = (0..15).map(|i| f64::from(i) * 0.5).collect();
    let fit = fit_exponential(&x, &model(3.0, -2.0, 0.7, &x), DEFAULT_BUDGET).unwrap();
    assert!((fit.alpha - 3.0).abs() < 1e-9 && (fit.beta + 2.0).abs() < 1e-9 && (fit.gamma - 0.7).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovers_random_models(a in -5.0f64..5.0, b in 0.5f64..10.0, g in 0.05f64..1.5, neg in any::<bool>()) {
        let b = if neg { -b } else { b };
        let x: Vec<f64> = (0..25).map(f64::from).collect();
        let fit = fit_exponential(&x, &model(a, b, g, &x), DEFAULT_BUDGET).unwrap();
        prop_assert!(fit.converged);
        prop_assert!((fit.alpha - a).abs() < 1e-7 * (1.0 + a.abs()), "{:?}", fit);
        prop_assert!((fit.beta - b).abs() < 1e-7 * b.abs(), "{:?}", fit);
        prop_assert!((fit.gamma - g).abs() < 1e-7 * g, "{:?}", fit);
    }
}
