//! Trained model and posterior artifacts.
//!
//! Parameters are stored as base64-encoded little-endian `f64` so they survive a
//! round trip bit for bit. Every artifact records the hashes of the inputs it
//! was derived from; loaders refuse artifacts whose hashes no longer match.

use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use nssm_unc_core::linalg::{packed_len, Cholesky};
use nssm_unc_core::trainer::TrainConfig;
use nssm_unc_core::{LaplacePosterior, MlpSpec, NeuralSSModel, ParamVector, SequenceModel};
use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;
use crate::error::{CliError, CliResult};
use crate::io::{ensure_parent, read_json, write_json};

pub const MODEL_FORMAT: &str = "nssm-unc/model/1";
pub const POSTERIOR_FORMAT: &str = "nssm-unc/posterior/1";

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>, String> {
    let bytes = B64.decode(text).map_err(|e| format!("invalid base64: {e}"))?;
    if bytes.len() % 8 != 0 {
        return Err(format!("{} bytes is not a whole number of f64 values", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Hash of a dataset as stored on disk (CSV contents).
pub fn file_hash(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub n_x: usize,
    pub n_u: usize,
    pub f_spec: MlpSpec,
    pub g_spec: MlpSpec,
    pub train: TrainConfig,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub theta: String,
    pub best_nll: f64,
    pub best_epoch: usize,
    pub beta_estimate: Option<f64>,
    pub wall_time_s: Option<f64>,
}

impl ModelArtifact {
    pub fn model(&self) -> CliResult<NeuralSSModel> {
        let theta = decode_f64s(&self.theta).map_err(CliError::Config)?;
        let mut model = NeuralSSModel::from_specs(self.n_x, self.n_u, self.f_spec, self.g_spec)?;
        if theta.len() != model.n_params() {
            return Err(CliError::Config(format!(
                "model artifact holds {} parameters, architecture needs {}",
                theta.len(),
                model.n_params()
            )));
        }
        model.set_theta(&theta);
        Ok(model)
    }

    pub fn model_hash(&self) -> String {
        sha256_hex(self.theta.as_bytes())
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::Missing {
                stage: "train",
                path: path.to_path_buf(),
            });
        }
        let art: Self = read_json(path)?;
        if art.format != MODEL_FORMAT {
            return Err(CliError::parse(path, 1, format!("unsupported format `{}`", art.format)));
        }
        Ok(art)
    }
}

/// JSON header of a stored posterior; the packed lower-triangular Cholesky
/// factor of the precision lives in a sibling `.bin` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorHeader {
    pub format: String,
    pub tau: f64,
    pub beta: f64,
    pub n_theta: usize,
    pub jitter: f64,
    pub washout: usize,
    pub dataset_hash: String,
    pub model_hash: String,
    pub config_hash: String,
    pub theta_map: String,
    pub factor_file: String,
    pub factor_sha256: String,
    pub log_det_precision: f64,
}

fn factor_path(json: &Path) -> PathBuf {
    json.with_extension("bin")
}

#[derive(Debug)]
pub struct PosteriorArtifact {
    pub header: PosteriorHeader,
    pub posterior: LaplacePosterior,
}

impl PosteriorArtifact {
    pub fn new(
        posterior: LaplacePosterior,
        washout: usize,
        dataset_hash: String,
        model_hash: String,
        config_hash: String,
    ) -> Self {
        let factor = posterior.factor();
        let header = PosteriorHeader {
            format: POSTERIOR_FORMAT.to_string(),
            tau: posterior.tau,
            beta: posterior.beta,
            n_theta: posterior.n_params(),
            jitter: posterior.jitter,
            washout,
            dataset_hash,
            model_hash,
            config_hash,
            theta_map: encode_f64s(&posterior.theta_map),
            factor_file: String::new(),
            factor_sha256: sha256_hex(&f64_bytes(factor.packed())),
            log_det_precision: factor.log_det(),
        };
        Self { header, posterior }
    }

    pub fn save(&mut self, path: &Path) -> CliResult<()> {
        let bin = factor_path(path);
        ensure_parent(&bin)?;
        std::fs::write(&bin, f64_bytes(self.posterior.factor().packed()))
            .map_err(|e| CliError::io(&bin, e))?;
        self.header.factor_file = bin
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        write_json(path, &self.header)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::Missing {
                stage: "laplace",
                path: path.to_path_buf(),
            });
        }
        let header: PosteriorHeader = read_json(path)?;
        if header.format != POSTERIOR_FORMAT {
            return Err(CliError::parse(path, 1, format!("unsupported format `{}`", header.format)));
        }
        let bin = path.with_file_name(&header.factor_file);
        let bytes = std::fs::read(&bin).map_err(|e| CliError::io(&bin, e))?;
        if sha256_hex(&bytes) != header.factor_sha256 {
            return Err(CliError::Stale(format!(
                "{} does not match the checksum recorded in {}",
                bin.display(),
                path.display()
            )));
        }
        let n = header.n_theta;
        if bytes.len() != 8 * packed_len(n) {
            return Err(CliError::parse(
                &bin,
                0,
                format!("expected {} packed values, found {} bytes", packed_len(n), bytes.len()),
            ));
        }
        let packed: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let theta = decode_f64s(&header.theta_map).map_err(|m| CliError::parse(path, 0, m))?;
        let posterior = LaplacePosterior::from_factor(
            ParamVector::from(theta),
            header.tau,
            header.beta,
            Cholesky::from_packed(n, packed),
            header.jitter,
        )?;
        Ok(Self { header, posterior })
    }
}
