use nssm_unc_core::rng;
use nssm_unc_core::{coverage, fit_index, rmse};
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

fn signal(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    let d = Normal::new(0.3, 1.0).unwrap();
    (0..n).map(|_| d.sample(&mut r)).collect()
}

#[test]
fn perfect_and_mean_predictors() {
    let y = signal(500, 1);
    assert_eq!(fit_index(&y, &y).unwrap(), 100.0);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let fit = fit_index(&y, &vec![mean; y.len()]).unwrap();
    assert!(fit.abs() <= 1e-12);
    assert_eq!(rmse(&y, &y).unwrap(), 0.0);
}

#[test]
fn constant_target_is_rejected() {
    let err = fit_index(&[1.0; 10], &[1.0; 10]).unwrap_err();
    assert_eq!(err.to_string(), "FIT undefined (zero variance)");
}

#[test]
fn noise_lowers_fit_on_average() {
    let y = signal(300, 2);
    let base: Vec<f64> = y.iter().map(|v| v + 0.05 * v.sin()).collect();
    let base_fit = fit_index(&y, &base).unwrap();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut r = rng::seeded(3);
    let mean_fit = (0..100)
        .map(|_| {
            let noisy: Vec<f64> = base.iter().map(|v| v + noise.sample(&mut r)).collect();
            fit_index(&y, &noisy).unwrap()
        })
        .sum::<f64>()
        / 100.0;
    assert!(mean_fit < base_fit);
}

#[test]
fn degenerate_intervals_count_as_inside() {
    let y = signal(50, 4);
    assert_eq!(coverage(&y, &y, &y).unwrap(), 100.0);
    let wide = vec![1e300; 50];
    let neg: Vec<f64> = wide.iter().map(|v| -v).collect();
    assert_eq!(coverage(&y, &neg, &wide).unwrap(), 100.0);
}

proptest! {
    #[test]
    fn fit_is_scale_invariant(seed in any::<u64>(), alpha in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let y = signal(64, seed);
        let p = signal(64, seed ^ 7);
        let ys: Vec<f64> = y.iter().map(|v| alpha * v).collect();
        let ps: Vec<f64> = p.iter().map(|v| alpha * v).collect();
        let (a, b) = (fit_index(&y, &p).unwrap(), fit_index(&ys, &ps).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn coverage_monotone_under_widening(seed in any::<u64>(), half in 0.0f64..2.0, extra in 0.0f64..1.0) {
        let y = signal(100, seed);
        let m = signal(100, seed ^ 9);
        let lo: Vec<f64> = m.iter().map(|v| v - half).collect();
        let hi: Vec<f64> = m.iter().map(|v| v + half).collect();
        let lo2: Vec<f64> = lo.iter().map(|v| v - extra).collect();
        let hi2: Vec<f64> = hi.iter().map(|v| v + extra).collect();
        let c1 = coverage(&y, &lo, &hi).unwrap();
        let c2 = coverage(&y, &lo2, &hi2).unwrap();
        prop_assert!(c2 >= c1);
        prop_assert!((0.0..=100.0).contains(&c1));
    }
}
