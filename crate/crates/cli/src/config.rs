//! Experiment configuration (TOML). Every field has a default, so an empty file
//! reproduces the reference experiment.

use std::path::{Path, PathBuf};

use nssm_unc_core::multisine::MultisineConfig;
use nssm_unc_core::trainer::{RefineMethod, TrainConfig};
use nssm_unc_core::wh::{Nonlinearity, SAMPLE_RATE};
use nssm_unc_core::NeuralSSModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub fs: f64,
    /// Output noise standard deviation in V.
    pub sigma_e: f64,
    pub nonlinearity: Nonlinearity,
    pub train: SignalConfig,
    pub tests: Vec<SignalConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    pub id: String,
    pub n_samples: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub std: f64,
}

impl SignalConfig {
    fn new(id: &str, band_lo: f64, band_hi: f64, std: f64) -> Self {
        Self {
            id: id.to_string(),
            n_samples: 10_000,
            band_lo,
            band_hi,
            std,
        }
    }

    pub fn multisine(&self, fs: f64, seed: u64) -> MultisineConfig {
        MultisineConfig {
            n_samples: self.n_samples,
            fs,
            band_lo: self.band_lo,
            band_hi: self.band_hi,
            target_std: self.std,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_x: usize,
    pub n_hidden: usize,
    pub bypass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub subseq_len: usize,
    pub epochs_adam: usize,
    pub epochs_refine: usize,
    pub refine_iters: usize,
    pub refine: RefineMethod,
    pub lbfgs_memory: usize,
    pub lr: f64,
    pub washout: usize,
    pub tau: f64,
    /// Noise precision; defaults to `1 / sigma_e^2`.
    pub beta: Option<f64>,
    pub estimate_beta: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub interval_multiplier: f64,
    /// Leading samples excluded from the metrics.
    pub transient: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            fs: SAMPLE_RATE,
            sigma_e: 5e-3,
            nonlinearity: Nonlinearity::Standard,
            train: SignalConfig::new("train", 0.0, 2000.0, 0.4),
            tests: vec![
                SignalConfig::new("multisine1", 0.0, 2000.0, 0.4),
                SignalConfig::new("multisine2", 1000.0, 2000.0, 0.4),
                SignalConfig::new("multisine3", 0.0, 2000.0, 0.8),
                SignalConfig::new("multisine4", 0.0, 10000.0, 0.4),
            ],
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_x: 6,
            n_hidden: 15,
            bypass: true,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            subseq_len: t.subseq_len,
            epochs_adam: t.epochs_adam,
            epochs_refine: t.epochs_refine,
            refine_iters: t.refine_iters,
            refine: t.refine,
            lbfgs_memory: t.lbfgs_memory,
            lr: t.lr,
            washout: t.washout,
            tau: t.tau,
            beta: None,
            estimate_beta: t.estimate_beta,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            interval_multiplier: 3.0,
            transient: 0,
        }
    }
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("nssm-run"),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            eval: EvalConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

/// Named random streams derived from the global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPurpose {
    Input(usize),
    Noise(usize),
    ModelInit,
    Shuffle,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0);
            CliError::parse(path, line, e.message().to_string())
        })
    }

    /// Reduced profile for CI: shorter records and fewer epochs.
    pub fn fast(mut self) -> Self {
        self.data.train.n_samples = 2000;
        for t in &mut self.data.tests {
            t.n_samples = 2000;
        }
        self.train.epochs_adam = 8;
        self.train.epochs_refine = 2;
        self.train.refine_iters = 10;
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = &self.data;
        if !(d.sigma_e >= 0.0) {
            return Err(CliError::Config(format!("sigma_e must be >= 0, got {}", d.sigma_e)));
        }
        for (i, s) in std::iter::once(&d.train).chain(&d.tests).enumerate() {
            s.multisine(d.fs, self.seed_for(SeedPurpose::Input(i)))
                .validate()
                .map_err(|e| CliError::Config(format!("signal `{}`: {e}", s.id)))?;
        }
        let mut ids: Vec<&str> = d.tests.iter().map(|t| t.id.as_str()).collect();
        ids.push(&d.train.id);
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("signal ids must be unique".into()));
        }
        if d.tests.is_empty() {
            return Err(CliError::Config("at least one test signal is required".into()));
        }
        self.build_model()?;
        let tc = self.train_config()?;
        tc.validate()
            .map_err(|e| CliError::Config(format!("train: {e}")))?;
        if tc.subseq_len > d.train.n_samples {
            return Err(CliError::Config(format!(
                "train: sub-sequence length {} exceeds training length {}",
                tc.subseq_len, d.train.n_samples
            )));
        }
        if !(self.eval.interval_multiplier > 0.0) {
            return Err(CliError::Config("eval: interval multiplier must be positive".into()));
        }
        Ok(())
    }

    pub fn seed_for(&self, purpose: SeedPurpose) -> u64 {
        let tag = match purpose {
            SeedPurpose::Input(i) => 0x100 + i as u64,
            SeedPurpose::Noise(i) => 0x200 + i as u64,
            SeedPurpose::ModelInit => 0x300,
            SeedPurpose::Shuffle => 0x301,
        };
        splitmix64(self.seed ^ splitmix64(tag))
    }

    pub fn beta(&self) -> CliResult<f64> {
        match self.train.beta {
            Some(b) => Ok(b),
            None if self.data.sigma_e > 0.0 => Ok(1.0 / (self.data.sigma_e * self.data.sigma_e)),
            None => Err(CliError::Config(
                "train.beta must be set when sigma_e is 0".into(),
            )),
        }
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            batch_size: t.batch_size,
            subseq_len: t.subseq_len,
            epochs_adam: t.epochs_adam,
            epochs_refine: t.epochs_refine,
            refine_iters: t.refine_iters,
            refine: t.refine,
            lbfgs_memory: t.lbfgs_memory,
            lr: t.lr,
            washout: t.washout,
            tau: t.tau,
            beta: self.beta()?,
            estimate_beta: t.estimate_beta,
            seed: self.seed_for(SeedPurpose::Shuffle),
        })
    }

    pub fn build_model(&self) -> CliResult<NeuralSSModel> {
        let m = &self.model;
        NeuralSSModel::new(m.n_x, 1, m.n_hidden, m.bypass)
            .map_err(|e| CliError::Config(format!("model: {e}")))
    }

    /// Hash of the sections that determine the generated data.
    pub fn data_hash(&self) -> String {
        hash_json(&(self.seed, &self.data))
    }

    /// Hash of the sections that determine the trained model and posterior.
    pub fn train_hash(&self) -> String {
        hash_json(&(self.seed, &self.data, &self.model, &self.train))
    }

    /// Hash of the whole configuration.
    pub fn full_hash(&self) -> String {
        hash_json(self)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.paths.out_dir.join("data")
    }

    pub fn dataset_path(&self, id: &str) -> PathBuf {
        self.data_dir().join(format!("{id}.csv"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths.out_dir.join("model.json")
    }

    pub fn trace_path(&self) -> PathBuf {
        self.paths.out_dir.join("nll_trace.csv")
    }

    pub fn posterior_path(&self) -> PathBuf {
        self.paths.out_dir.join("posterior.json")
    }

    pub fn prediction_path(&self, id: &str) -> PathBuf {
        self.paths.out_dir.join("predictions").join(format!("{id}.csv"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.paths.out_dir.join("report.csv")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.paths.out_dir.join("summary.csv")
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_json<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("config serializes"))
}
