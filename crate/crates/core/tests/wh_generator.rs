use std::f64::consts::PI;

use nssm_unc_core::multisine::population_std;
use nssm_unc_core::{multisine, wh_simulate, LtiFilter, MultisineConfig, Nonlinearity, WienerHammerstein};
use proptest::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const FS: f64 = 51200.0;

fn config(n: usize, lo: f64, hi: f64, std: f64, seed: u64) -> MultisineConfig {
    MultisineConfig {
        n_samples: n,
        fs: FS,
        band_lo: lo,
        band_hi: hi,
        target_std: std,
        seed,
    }
}

/// Fraction of the (non-DC) signal energy that falls in bins within `[lo, hi]` Hz.
fn in_band_fraction(x: &[f64], lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().skip(1) {
        let bin = k.min(n - k);
        let f = bin as f64 * FS / n as f64;
        let e = c.norm_sqr();
        total += e;
        if f >= lo && f <= hi {
            inside += e;
        }
    }
    inside / total
}

#[test]
fn lti_blocks_are_linear() {
    let a: Vec<f64> = (0..500).map(|k| (k as f64 * 0.37).sin()).collect();
    let b: Vec<f64> = (0..500).map(|k| ((k * k) as f64 * 0.011).cos()).collect();
    let (alpha, beta) = (1.7, -0.4);
    for filt in [LtiFilter::g1(), LtiFilter::g2()] {
        let mut f = filt.clone();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
        let ya = f.filter(&a);
        let yb = f.filter(&b);
        let ym = f.filter(&mix);
        for k in 0..500 {
            assert!((ym[k] - (alpha * ya[k] + beta * yb[k])).abs() <= 1e-9, "step {k}");
        }
    }
}

#[test]
fn g1_has_unit_dc_gain() {
    let (re, im) = LtiFilter::g1().response_at(0.0);
    assert!(((re * re + im * im).sqrt() - 1.0).abs() <= 1e-4);
}

#[test]
fn g2_notch_sits_on_the_numerator_zero() {
    // The numerator is symmetric: (1 + z^-1) (b0 - (b1 - b0) z^-1 + b0 z^-2), whose
    // unit-circle zeros sit at cos w = (b0 - b1) / (2 b0).
    let b = nssm_unc_core::wh::G2_B;
    let w0 = ((b[0] - b[1]) / (2.0 * b[0])).acos();
    let f0 = w0 * FS / (2.0 * PI);

    let resp = LtiFilter::g2().frequency_response(25601, FS);
    let k = (1..resp.len() - 1)
        .filter(|&k| resp[k].magnitude < resp[k - 1].magnitude && resp[k].magnitude < resp[k + 1].magnitude)
        .min_by(|&i, &j| resp[i].magnitude.total_cmp(&resp[j].magnitude))
        .expect("a local minimum");
    assert!((resp[k].freq_hz - f0).abs() <= 2.0, "minimum at {} Hz, zero at {f0} Hz", resp[k].freq_hz);
    assert!(resp[k].magnitude < 1e-3);
}

#[test]
fn frequency_response_matches_filtered_sinusoid() {
    let f = 1000.0;
    let n = 20000;
    let u: Vec<f64> = (0..n).map(|k| (2.0 * PI * f * k as f64 / FS).sin()).collect();
    let y = LtiFilter::g1().filter(&u);
    let steady = &y[n / 2..];
    let amp = steady.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (re, im) = LtiFilter::g1().response_at(2.0 * PI * f / FS);
    assert!((amp - (re * re + im * im).sqrt()).abs() <= 1e-3);
}

#[test]
fn training_signal_properties() {
    let cfg = config(10000, 0.0, 2000.0, 0.4, 1);
    let u = multisine(&cfg).unwrap();
    assert!((population_std(&u) - 0.4).abs() <= 1e-12);
    assert!(in_band_fraction(&u, 0.0, 2000.0) >= 0.999);
    assert_eq!(cfg.bins().len(), 390);
}

#[test]
fn narrow_band_signal_has_no_energy_outside() {
    let u = multisine(&config(10000, 1000.0, 2000.0, 0.4, 2)).unwrap();
    assert!(in_band_fraction(&u, 1000.0, 2000.0) >= 0.999);
    assert!(in_band_fraction(&u, 0.0, 990.0) <= 1e-6);
}

#[test]
fn noise_is_reproducible_and_has_the_requested_level() {
    let u = multisine(&config(10000, 0.0, 2000.0, 0.4, 3)).unwrap();
    let a = wh_simulate(&u, 5e-3, 9, Nonlinearity::Standard, FS).unwrap();
    let b = wh_simulate(&u, 5e-3, 9, Nonlinearity::Standard, FS).unwrap();
    assert_eq!(a, b);
    let clean = WienerHammerstein::new(Nonlinearity::Standard).respond(&u);
    let resid: Vec<f64> = a.y.iter().zip(&clean).map(|(y, c)| y - c).collect();
    assert!((population_std(&resid) - 5e-3).abs() <= 2e-4);
}

#[test]
fn nonlinearity_variants() {
    let s = Nonlinearity::Standard;
    assert_eq!(s.apply(0.0), 0.0);
    assert!((s.apply(1.1) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
    assert!((s.apply(-1.1) - 1.0).abs() < 1e-15);
    let p = Nonlinearity::Printed;
    assert_eq!(p.apply(-1.1), 0.0);
    assert!((p.apply(1.1) - (-2.0f64).exp()).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn multisine_std_and_band_hold(
        n in 256usize..4096,
        lo in 0.0f64..5000.0,
        width in 500.0f64..10000.0,
        std in 0.01f64..2.0,
        seed in any::<u64>(),
    ) {
        let cfg = config(n, lo, lo + width, std, seed);
        prop_assume!(!cfg.bins().is_empty());
        let u = multisine(&cfg).unwrap();
        prop_assert!((population_std(&u) - std).abs() <= 1e-12 * std.max(1.0));
        prop_assert!(in_band_fraction(&u, lo, lo + width) >= 0.999);
    }

    #[test]
    fn filters_are_time_invariant(delay in 1usize..50, seed in any::<u64>()) {
        let u = multisine(&config(400, 0.0, 10000.0, 1.0, seed)).unwrap();
        let mut shifted = vec![0.0; delay];
        shifted.extend_from_slice(&u);
        let y = LtiFilter::g2().filter(&u);
        let ys = LtiFilter::g2().filter(&shifted);
        for k in 0..u.len() {
            prop_assert!((ys[k + delay] - y[k]).abs() <= 1e-12);
        }
    }
}
