//! The five pipeline stages: generate, train, laplace, evaluate, report.
//!
//! Each stage reads the artifacts of the previous one, checks that their
//! recorded hashes still match the configuration and the files on disk, and
//! writes its own outputs with provenance attached.

use std::path::PathBuf;
use std::time::Instant;

use nssm_unc_core::metrics::after_transient;
use nssm_unc_core::multisine::population_std;
use nssm_unc_core::trainer::{train_map_with, EpochRecord};
use nssm_unc_core::{
    coverage, fit_index, gn_precision, multisine, predict_with_uncertainty, rmse, wh_simulate,
    Dataset, EvalReport, LtiFilter,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{encode_f64s, file_hash, ModelArtifact, PosteriorArtifact, MODEL_FORMAT};
use crate::config::{ExperimentConfig, SeedPurpose, SignalConfig};
use crate::error::{CliError, CliResult};
use crate::exec::RayonExecutor;
use crate::io::{self, read_dataset, write_bode, write_dataset, write_json, write_prediction};

/// Frequency points of the exported Bode tables.
const BODE_POINTS: usize = 1025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub sha256: String,
    pub input_seed: u64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub datasets: Vec<ManifestEntry>,
}

fn signals(cfg: &ExperimentConfig) -> impl Iterator<Item = (usize, &SignalConfig)> {
    std::iter::once(&cfg.data.train).chain(&cfg.data.tests).enumerate()
}

/// Builds one dataset in memory.
pub fn generate_signal(cfg: &ExperimentConfig, index: usize, sig: &SignalConfig) -> CliResult<Dataset> {
    let input_seed = cfg.seed_for(SeedPurpose::Input(index));
    let noise_seed = cfg.seed_for(SeedPurpose::Noise(index));
    let u = multisine(&sig.multisine(cfg.data.fs, input_seed))?;
    let mut ds = wh_simulate(&u, cfg.data.sigma_e, noise_seed, cfg.data.nonlinearity, cfg.data.fs)?;
    ds.meta.seed = input_seed;
    ds.meta.band = Some((sig.band_lo, sig.band_hi));
    ds.meta.std = Some(population_std(&u));
    Ok(ds)
}

/// Writes the training set, the test sets, the Bode tables of both LTI blocks
/// and a manifest. Everything is generated and validated before the first file
/// is written.
pub fn cmd_generate(cfg: &ExperimentConfig) -> CliResult<Manifest> {
    cfg.validate()?;
    let datasets = signals(cfg)
        .map(|(i, sig)| generate_signal(cfg, i, sig).map(|ds| (sig.id.clone(), ds)))
        .collect::<CliResult<Vec<_>>>()?;
    let hash = cfg.data_hash();
    let mut entries = Vec::new();
    for (id, ds) in &datasets {
        let path = cfg.dataset_path(id);
        write_dataset(&path, ds, &hash)?;
        entries.push(ManifestEntry {
            id: id.clone(),
            sha256: file_hash(&path)?,
            path,
            input_seed: ds.meta.seed,
            noise_seed: ds.meta.noise_seed,
        });
    }
    let dir = cfg.data_dir();
    write_bode(&dir.join("bode_g1.csv"), &LtiFilter::g1().frequency_response(BODE_POINTS, cfg.data.fs))?;
    write_bode(&dir.join("bode_g2.csv"), &LtiFilter::g2().frequency_response(BODE_POINTS, cfg.data.fs))?;
    let manifest = Manifest {
        seed: cfg.seed,
        config_hash: hash,
        datasets: entries,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Loads a generated dataset and checks it was produced by this configuration.
pub fn load_dataset(cfg: &ExperimentConfig, id: &str) -> CliResult<(Dataset, String)> {
    let path = cfg.dataset_path(id);
    if !path.exists() {
        return Err(CliError::Missing { stage: "generate", path });
    }
    let (ds, sidecar) = read_dataset(&path)?;
    if sidecar.config_hash != cfg.data_hash() {
        return Err(CliError::Stale(format!(
            "{} was generated with a different data configuration; rerun `nssm-unc generate`",
            path.display()
        )));
    }
    Ok((ds, file_hash(&path)?))
}

pub fn cmd_train(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&EpochRecord)) -> CliResult<ModelArtifact> {
    cfg.validate()?;
    let (ds, dataset_hash) = load_dataset(cfg, &cfg.data.train.id)?;
    let tc = cfg.train_config()?;
    let mut model = cfg.build_model()?;
    model.init_random(&mut nssm_unc_core::rng::seeded(cfg.seed_for(SeedPurpose::ModelInit)));
    let start = Instant::now();
    let mut report = train_map_with(&RayonExecutor, &ds, &model, &tc, progress)?;
    report.wall_time_s = Some(start.elapsed().as_secs_f64());
    io::write_trace(&cfg.trace_path(), &report.trace)?;
    let artifact = ModelArtifact {
        format: MODEL_FORMAT.to_string(),
        n_x: model.n_x(),
        n_u: model.n_u(),
        f_spec: model.f_slice().spec,
        g_spec: model.g_slice().spec,
        train: tc,
        seed: cfg.seed,
        config_hash: cfg.train_hash(),
        dataset_hash,
        theta: encode_f64s(&report.theta_map),
        best_nll: report.best_nll,
        best_epoch: report.best_epoch,
        beta_estimate: report.beta_estimate,
        wall_time_s: report.wall_time_s,
    };
    artifact.save(&cfg.model_path())?;
    Ok(artifact)
}

fn load_model_checked(cfg: &ExperimentConfig) -> CliResult<ModelArtifact> {
    let art = ModelArtifact::load(&cfg.model_path())?;
    if art.config_hash != cfg.train_hash() {
        return Err(CliError::Stale(format!(
            "{} was trained with a different configuration; rerun `nssm-unc train`",
            cfg.model_path().display()
        )));
    }
    Ok(art)
}

pub fn cmd_laplace(cfg: &ExperimentConfig) -> CliResult<PosteriorArtifact> {
    cfg.validate()?;
    let art = load_model_checked(cfg)?;
    let (ds, dataset_hash) = load_dataset(cfg, &cfg.data.train.id)?;
    if dataset_hash != art.dataset_hash {
        return Err(CliError::Stale(format!(
            "training data changed since {} was written; rerun `nssm-unc train`",
            cfg.model_path().display()
        )));
    }
    let model = art.model()?;
    let tc = &art.train;
    let post = gn_precision(&model, &ds.u, tc.tau, tc.beta, tc.washout)?;
    let mut out = PosteriorArtifact::new(post, tc.washout, dataset_hash, art.model_hash(), cfg.train_hash());
    out.save(&cfg.posterior_path())?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProvenance {
    pub seed: u64,
    pub config_hash: String,
    pub model_hash: String,
    pub posterior_factor_sha256: String,
    pub datasets: Vec<(String, String)>,
    pub interval_multiplier: f64,
    pub transient: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub provenance: EvalProvenance,
    pub reports: Vec<EvalReport>,
}

pub fn cmd_evaluate(cfg: &ExperimentConfig) -> CliResult<EvalOutput> {
    cfg.validate()?;
    let art = load_model_checked(cfg)?;
    let post_art = PosteriorArtifact::load(&cfg.posterior_path())?;
    if post_art.header.model_hash != art.model_hash() || post_art.header.config_hash != cfg.train_hash() {
        return Err(CliError::Stale(format!(
            "{} was computed for a different model; rerun `nssm-unc laplace`",
            cfg.posterior_path().display()
        )));
    }
    let model = art.model()?;
    let post = &post_art.posterior;
    let tests = cfg
        .data
        .tests
        .iter()
        .map(|t| load_dataset(cfg, &t.id).map(|(ds, h)| (t.id.clone(), ds, h)))
        .collect::<CliResult<Vec<_>>>()?;

    let mult = cfg.eval.interval_multiplier;
    let skip = cfg.eval.transient;
    let reports = tests
        .par_iter()
        .map(|(id, ds, _)| -> CliResult<EvalReport> {
            let pred = predict_with_uncertainty(&model, post, &ds.u, mult)?;
            write_prediction(&cfg.prediction_path(id), &ds.u, &ds.y, &pred)?;
            let y = after_transient(&ds.y, skip);
            let surprise = pred.surprise.ok_or(nssm_unc_core::Error::ZeroNominalEnergy)?;
            Ok(EvalReport {
                signal_id: id.clone(),
                fit: fit_index(y, after_transient(&pred.y_mean, skip))?,
                coverage: coverage(y, after_transient(&pred.lo, skip), after_transient(&pred.hi, skip))?,
                surprise,
                rmse: rmse(y, after_transient(&pred.y_mean, skip))?,
                n_steps: y.len(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    io::write_report(&cfg.report_path(), &reports)?;
    let out = EvalOutput {
        provenance: EvalProvenance {
            seed: cfg.seed,
            config_hash: cfg.full_hash(),
            model_hash: art.model_hash(),
            posterior_factor_sha256: post_art.header.factor_sha256.clone(),
            datasets: tests.iter().map(|(id, _, h)| (id.clone(), h.clone())).collect(),
            interval_multiplier: mult,
            transient: skip,
        },
        reports,
    };
    write_json(&cfg.report_path().with_extension("json"), &out)?;
    Ok(out)
}

/// Published results of the reference experiment: FIT, coverage, surprise.
pub const REFERENCE_ROWS: [(&str, f64, f64, f64); 4] = [
    ("multisine1", 98.1, 99.2, 0.33),
    ("multisine2", 97.7, 98.6, 0.43),
    ("multisine3", 93.9, 96.1, 2.10),
    ("multisine4", 87.8, 80.6, 4.03),
];

pub fn reference_row(id: &str) -> Option<(f64, f64, f64)> {
    REFERENCE_ROWS
        .iter()
        .find(|r| r.0 == id)
        .map(|&(_, f, c, s)| (f, c, s))
}

/// Renders the measured rows next to the published reference rows.
pub fn format_summary(reports: &[EvalReport]) -> String {
    let mut s = format!(
        "{:<12} {:>8} {:>9} {:>9}   {:>8} {:>9} {:>9}\n",
        "signal", "fit", "coverage", "surprise", "ref fit", "ref cov", "ref surp"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<12} {:>8.2} {:>9.2} {:>9.3}",
            r.signal_id, r.fit, r.coverage, r.surprise
        ));
        match reference_row(&r.signal_id) {
            Some((f, c, p)) => s.push_str(&format!("   {f:>8.1} {c:>9.1} {p:>9.2}\n")),
            None => s.push_str(&format!("   {:>8} {:>9} {:>9}\n", "-", "-", "-")),
        }
    }
    s
}

pub fn cmd_report(cfg: &ExperimentConfig) -> CliResult<String> {
    let path = cfg.report_path().with_extension("json");
    if !path.exists() {
        return Err(CliError::Missing { stage: "evaluate", path });
    }
    let out: EvalOutput = io::read_json(&path)?;
    if out.provenance.config_hash != cfg.full_hash() {
        return Err(CliError::Stale(format!(
            "{} was produced with a different configuration; rerun `nssm-unc evaluate`",
            path.display()
        )));
    }
    let mut csv = String::from("signal,source,fit,coverage,surprise\n");
    for r in &out.reports {
        csv.push_str(&format!("{},measured,{},{},{}\n", r.signal_id, r.fit, r.coverage, r.surprise));
        if let Some((f, c, p)) = reference_row(&r.signal_id) {
            csv.push_str(&format!("{},reference,{f},{c},{p}\n", r.signal_id));
        }
    }
    io::write_text(&cfg.summary_path(), &csv)?;
    Ok(format_summary(&out.reports))
}
