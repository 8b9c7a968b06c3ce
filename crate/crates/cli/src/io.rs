//! Plain-text file formats.
//!
//! Datasets are stored as `k,u,y` CSV with a JSON sidecar holding the generator
//! settings. Floats are written with the shortest representation that parses
//! back to the same value, so a save/load round trip is bit exact.

use std::fs;
use std::path::{Path, PathBuf};

use nssm_unc_core::trainer::EpochRecord;
use nssm_unc_core::wh::FreqPoint;
use nssm_unc_core::{Dataset, DatasetMeta, EvalReport, Nonlinearity, UncertainPrediction};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Metadata written next to every dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub fs: f64,
    pub sigma_e: f64,
    pub seed: u64,
    pub noise_seed: u64,
    pub band: Option<(f64, f64)>,
    pub std: Option<f64>,
    pub nonlinearity_variant: Nonlinearity,
    pub n_samples: usize,
    pub config_hash: String,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line(), e.to_string()))
}

/// Builds CSV text from rows of pre-formatted fields.
struct CsvText(String);

impl CsvText {
    fn new(header: &[&str]) -> Self {
        let mut s = header.join(",");
        s.push('\n');
        Self(s)
    }

    fn row(&mut self, fields: &[String]) {
        self.0.push_str(&fields.join(","));
        self.0.push('\n');
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

/// Parsed numeric CSV: header plus rows, each tagged with its 1-based line number.
pub struct NumericCsv {
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<f64>)>,
}

pub fn read_numeric_csv(path: &Path, expected_header: &[&str]) -> CliResult<NumericCsv> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines
        .next()
        .ok_or_else(|| CliError::parse(path, 1, "empty file"))?;
    let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
    if header != expected_header {
        return Err(CliError::parse(
            path,
            1,
            format!("expected header `{}`, got `{head}`", expected_header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(CliError::parse(
                path,
                line_no,
                format!("expected {} columns, got {}", header.len(), fields.len()),
            ));
        }
        let mut values = Vec::with_capacity(fields.len());
        for (name, field) in header.iter().zip(&fields) {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::parse(path, line_no, format!("field `{name}`: not a number: `{field}`"))
            })?;
            values.push(v);
        }
        rows.push((line_no, values));
    }
    Ok(NumericCsv { header, rows })
}

const DATASET_HEADER: [&str; 3] = ["k", "u", "y"];

/// Writes `path` (CSV) and its JSON sidecar.
pub fn write_dataset(path: &Path, ds: &Dataset, config_hash: &str) -> CliResult<()> {
    let mut csv = CsvText::new(&DATASET_HEADER);
    for (k, (u, y)) in ds.u.iter().zip(&ds.y).enumerate() {
        csv.row(&[k.to_string(), f(*u), f(*y)]);
    }
    write_text(path, &csv.0)?;
    let sidecar = DatasetSidecar {
        fs: ds.fs,
        sigma_e: ds.sigma_e,
        seed: ds.meta.seed,
        noise_seed: ds.meta.noise_seed,
        band: ds.meta.band,
        std: ds.meta.std,
        nonlinearity_variant: ds.meta.nonlinearity,
        n_samples: ds.len(),
        config_hash: config_hash.to_string(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> CliResult<(Dataset, DatasetSidecar)> {
    let side_path = sidecar_path(path);
    if !side_path.exists() {
        return Err(CliError::Missing {
            stage: "generate",
            path: side_path,
        });
    }
    let sidecar: DatasetSidecar = read_json(&side_path)?;
    let csv = read_numeric_csv(path, &DATASET_HEADER)?;
    let mut u = Vec::with_capacity(csv.rows.len());
    let mut y = Vec::with_capacity(csv.rows.len());
    for (expected_k, (line, row)) in csv.rows.iter().enumerate() {
        if row[0] != expected_k as f64 {
            return Err(CliError::parse(
                path,
                *line,
                format!("field `k`: expected {expected_k}, got {}", row[0]),
            ));
        }
        for (name, v) in ["u", "y"].iter().zip(&row[1..]) {
            if !v.is_finite() {
                return Err(CliError::parse(path, *line, format!("field `{name}`: non-finite value")));
            }
        }
        u.push(row[1]);
        y.push(row[2]);
    }
    if u.len() != sidecar.n_samples {
        return Err(CliError::parse(
            path,
            csv.rows.last().map_or(1, |r| r.0),
            format!("expected {} samples, found {}", sidecar.n_samples, u.len()),
        ));
    }
    let meta = DatasetMeta {
        seed: sidecar.seed,
        noise_seed: sidecar.noise_seed,
        band: sidecar.band,
        std: sidecar.std,
        nonlinearity: sidecar.nonlinearity_variant,
    };
    let ds = Dataset::new(u, y, sidecar.fs, sidecar.sigma_e, meta)?;
    Ok((ds, sidecar))
}

pub fn write_bode(path: &Path, points: &[FreqPoint]) -> CliResult<()> {
    let mut csv = CsvText::new(&["freq_hz", "magnitude", "magnitude_db", "phase_rad"]);
    for p in points {
        csv.row(&[f(p.freq_hz), f(p.magnitude), f(p.magnitude_db), f(p.phase_rad)]);
    }
    write_text(path, &csv.0)
}

pub const PREDICTION_HEADER: [&str; 8] =
    ["k", "u", "y_true", "y_mean", "std_epistemic", "std_total", "lo", "hi"];

pub fn write_prediction(path: &Path, u: &[f64], y_true: &[f64], pred: &UncertainPrediction) -> CliResult<()> {
    let mut csv = CsvText::new(&PREDICTION_HEADER);
    let std_e: Vec<f64> = pred.std_epistemic().collect();
    let std_t: Vec<f64> = pred.std_total().collect();
    for k in 0..pred.len() {
        csv.row(&[
            k.to_string(),
            f(u[k]),
            f(y_true[k]),
            f(pred.y_mean[k]),
            f(std_e[k]),
            f(std_t[k]),
            f(pred.lo[k]),
            f(pred.hi[k]),
        ]);
    }
    write_text(path, &csv.0)
}

pub fn write_report(path: &Path, reports: &[EvalReport]) -> CliResult<()> {
    let mut csv = CsvText::new(&["signal", "fit", "coverage", "surprise", "rmse"]);
    for r in reports {
        csv.row(&[r.signal_id.clone(), f(r.fit), f(r.coverage), f(r.surprise), f(r.rmse)]);
    }
    write_text(path, &csv.0)
}

pub fn write_trace(path: &Path, trace: &[EpochRecord]) -> CliResult<()> {
    let mut csv = CsvText::new(&["epoch", "phase", "nll"]);
    for r in trace {
        let phase = format!("{:?}", r.phase).to_lowercase();
        csv.row(&[r.epoch.to_string(), phase, f(r.nll)]);
    }
    write_text(path, &csv.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(f(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
