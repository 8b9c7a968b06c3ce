//! Synthetic Wiener-Hammerstein system: `G2(f(G1(u)))` plus output noise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
// Inherent float methods shadow this trait whenever std is linked in.
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::rng;

pub const SAMPLE_RATE: f64 = 51200.0;

/// Numerator of G1(z) in powers of z^-1.
pub const G1_B: [f64; 4] = [0.010252, 0.030757, 0.030757, 0.010252];
pub const G1_A: [f64; 4] = [1.0, -2.151941, 1.744729, -0.510767];
pub const G2_B: [f64; 4] = [0.008706, -0.004596, -0.004596, 0.008706];
pub const G2_A: [f64; 4] = [1.0, -2.574867, 2.235716, -0.652629];

/// Direct-form IIR filter
/// `y[k] = sum_i b[i] u[k-i] - sum_{j>=1} a[j] y[k-j]`, starting from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    u_hist: Vec<f64>,
    y_hist: Vec<f64>,
}

impl LtiFilter {
    pub fn new(b: &[f64], a: &[f64]) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(Error::Config("filter needs coefficients".into()));
        }
        if a[0] != 1.0 {
            return Err(Error::Config(alloc::format!(
                "leading denominator coefficient must be 1, got {}",
                a[0]
            )));
        }
        Ok(Self {
            b: b.to_vec(),
            a: a.to_vec(),
            u_hist: vec![0.0; b.len()],
            y_hist: vec![0.0; a.len()],
        })
    }

    pub fn g1() -> Self {
        Self::new(&G1_B, &G1_A).expect("valid coefficients")
    }

    pub fn g2() -> Self {
        Self::new(&G2_B, &G2_A).expect("valid coefficients")
    }

    pub fn numerator(&self) -> &[f64] {
        &self.b
    }

    pub fn denominator(&self) -> &[f64] {
        &self.a
    }

    pub fn reset(&mut self) {
        self.u_hist.fill(0.0);
        self.y_hist.fill(0.0);
    }

    pub fn step(&mut self, u: f64) -> f64 {
        self.u_hist.rotate_right(1);
        self.u_hist[0] = u;
        self.y_hist.rotate_right(1);
        let mut y: f64 = self.b.iter().zip(&self.u_hist).map(|(b, u)| b * u).sum();
        for j in 1..self.a.len() {
            y -= self.a[j] * self.y_hist[j];
        }
        self.y_hist[0] = y;
        y
    }

    /// Filters a whole sequence from rest (the internal state is reset first).
    pub fn filter(&mut self, u: &[f64]) -> Vec<f64> {
        self.reset();
        u.iter().map(|&v| self.step(v)).collect()
    }

    /// Transfer function at `z = exp(i w)`, returned as `(re, im)`.
    pub fn response_at(&self, w: f64) -> (f64, f64) {
        let eval = |c: &[f64]| {
            c.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, &ci)| {
                let phi = -w * i as f64;
                (re + ci * phi.cos(), im + ci * phi.sin())
            })
        };
        let (nr, ni) = eval(&self.b);
        let (dr, di) = eval(&self.a);
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    /// `|H|` and phase on `n_points` frequencies evenly spaced over `[0, fs/2]`.
    pub fn frequency_response(&self, n_points: usize, fs: f64) -> Vec<FreqPoint> {
        assert!(n_points >= 2, "need at least two frequency points");
        (0..n_points)
            .map(|i| {
                let freq = 0.5 * fs * i as f64 / (n_points - 1) as f64;
                let (re, im) = self.response_at(2.0 * PI * freq / fs);
                let mag = (re * re + im * im).sqrt();
                FreqPoint {
                    freq_hz: freq,
                    magnitude: mag,
                    magnitude_db: 20.0 * mag.log10(),
                    phase_rad: im.atan2(re),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqPoint {
    pub freq_hz: f64,
    pub magnitude: f64,
    pub magnitude_db: f64,
    pub phase_rad: f64,
}

/// Static nonlinearity `f(x) = elu(-(10/11) x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    /// `elu(v) = exp(v) - 1` for `v <= 0`, `v` otherwise. Continuous, `f(0) = 0`.
    #[default]
    Standard,
    /// `elu(v) = exp(v - 1)` for `v <= 0`, `0` otherwise, as literally printed in
    /// some descriptions of this benchmark. Discontinuous at 0.
    Printed,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        let v = -(10.0 / 11.0) * x;
        match self {
            Nonlinearity::Standard => {
                if v <= 0.0 {
                    v.exp_m1()
                } else {
                    v
                }
            }
            Nonlinearity::Printed => {
                if v <= 0.0 {
                    (v - 1.0).exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Standard => "standard",
            Nonlinearity::Printed => "printed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerHammerstein {
    pub g1: LtiFilter,
    pub g2: LtiFilter,
    pub nonlinearity: Nonlinearity,
}

impl WienerHammerstein {
    pub fn new(nonlinearity: Nonlinearity) -> Self {
        Self {
            g1: LtiFilter::g1(),
            g2: LtiFilter::g2(),
            nonlinearity,
        }
    }

    /// Noise-free response from rest.
    pub fn respond(&mut self, u: &[f64]) -> Vec<f64> {
        let v = self.g1.filter(u);
        let w: Vec<f64> = v.iter().map(|&x| self.nonlinearity.apply(x)).collect();
        self.g2.filter(&w)
    }
}

/// Runs the system on `u` and adds i.i.d. Gaussian noise of standard deviation
/// `sigma_e` drawn from the stream identified by `seed`.
pub fn wh_simulate(
    u: &[f64],
    sigma_e: f64,
    seed: u64,
    nonlinearity: Nonlinearity,
    fs: f64,
) -> Result<Dataset> {
    if let Some(k) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(k));
    }
    if !(sigma_e >= 0.0) || !sigma_e.is_finite() {
        return Err(Error::Config(alloc::format!("noise std must be >= 0, got {sigma_e}")));
    }
    let mut system = WienerHammerstein::new(nonlinearity);
    let mut y = system.respond(u);
    if sigma_e > 0.0 {
        let noise = Normal::new(0.0, sigma_e).map_err(|e| Error::Config(alloc::format!("{e}")))?;
        let mut r = rng::stream(seed, NOISE_STREAM);
        for v in &mut y {
            *v += noise.sample(&mut r);
        }
    }
    Dataset::new(
        u.to_vec(),
        y,
        fs,
        sigma_e,
        DatasetMeta {
            noise_seed: seed,
            nonlinearity,
            ..DatasetMeta::default()
        },
    )
}

const NOISE_STREAM: u64 = 0x6e6f697365;
