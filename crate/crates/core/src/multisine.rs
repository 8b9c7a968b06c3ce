//! Random-phase multisine excitation with a flat amplitude spectrum.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
// Inherent float methods shadow this trait whenever std is linked in.
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultisineConfig {
    pub n_samples: usize,
    pub fs: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub target_std: f64,
    pub seed: u64,
}

impl MultisineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Config(alloc::format!(
                "multisine needs at least 2 samples, got {}",
                self.n_samples
            )));
        }
        if !(self.fs > 0.0) {
            return Err(Error::Config(alloc::format!("sample rate must be positive, got {}", self.fs)));
        }
        if !(0.0 <= self.band_lo && self.band_lo < self.band_hi && self.band_hi <= self.fs / 2.0) {
            return Err(Error::Config(alloc::format!(
                "band must satisfy 0 <= lo < hi <= fs/2, got [{}, {}] with fs = {}",
                self.band_lo,
                self.band_hi,
                self.fs
            )));
        }
        if !(self.target_std > 0.0) || !self.target_std.is_finite() {
            return Err(Error::Config(alloc::format!(
                "target std must be positive, got {}",
                self.target_std
            )));
        }
        Ok(())
    }

    /// DFT bin indices whose frequency lies inside the band (DC excluded).
    pub fn bins(&self) -> Vec<usize> {
        let n = self.n_samples;
        (1..=n / 2)
            .filter(|&k| {
                let f = k as f64 * self.fs / n as f64;
                f >= self.band_lo && f <= self.band_hi
            })
            .collect()
    }
}

/// One period of `sum_k cos(2 pi k n / N + phi_k)` over the in-band bins, with
/// uniform random phases, rescaled to the target standard deviation.
pub fn multisine(cfg: &MultisineConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let bins = cfg.bins();
    if bins.is_empty() {
        return Err(Error::EmptyBand {
            lo: cfg.band_lo,
            hi: cfg.band_hi,
        });
    }
    let n = cfg.n_samples;
    let mut r = rng::seeded(cfg.seed);
    let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let phases: Vec<(f64, f64)> = bins
        .iter()
        .map(|_| {
            let p: f64 = phase.sample(&mut r);
            (p.cos(), p.sin())
        })
        .collect();

    // cos(2 pi m / N + p) = cos(2 pi m/N) cos p - sin(2 pi m/N) sin p, with m = k n mod N.
    let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|m| {
            let w = 2.0 * PI * m as f64 / n as f64;
            (w.cos(), w.sin())
        })
        .unzip();
    let mut x = vec![0.0; n];
    for (&k, &(cp, sp)) in bins.iter().zip(&phases) {
        let mut m = 0usize;
        for v in x.iter_mut() {
            *v += cos_t[m] * cp - sin_t[m] * sp;
            m += k;
            if m >= n {
                m -= n;
            }
        }
    }

    let std = population_std(&x);
    let scale = cfg.target_std / std;
    for v in &mut x {
        *v *= scale;
    }
    Ok(x)
}

pub fn population_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}
