use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wh::Nonlinearity;

/// Generator settings recorded alongside a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Seed of the excitation signal.
    pub seed: u64,
    /// Seed of the measurement noise.
    pub noise_seed: u64,
    /// Excitation band in Hz.
    pub band: Option<(f64, f64)>,
    /// Target standard deviation of the excitation in V.
    pub std: Option<f64>,
    pub nonlinearity: Nonlinearity,
}

/// Input/output record of a single-input single-output experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub fs: f64,
    pub sigma_e: f64,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>, fs: f64, sigma_e: f64, meta: DatasetMeta) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Dimension {
                what: "dataset output",
                expected: u.len(),
                got: y.len(),
            });
        }
        if !(sigma_e >= 0.0) {
            return Err(Error::Config(alloc::format!("noise std must be >= 0, got {sigma_e}")));
        }
        Ok(Self {
            u,
            y,
            fs,
            sigma_e,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Noise precision `1 / sigma_e^2`.
    pub fn beta(&self) -> Option<f64> {
        (self.sigma_e > 0.0).then(|| 1.0 / (self.sigma_e * self.sigma_e))
    }
}
