#![allow(dead_code)]

use std::path::Path;

use nssm_unc::config::ExperimentConfig;
use nssm_unc::pipeline::{cmd_evaluate, cmd_generate, cmd_laplace, cmd_train, EvalOutput};

pub fn fast_config(out_dir: &Path, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default().fast();
    cfg.seed = seed;
    cfg.paths.out_dir = out_dir.to_path_buf();
    cfg
}

pub fn run_through_evaluate(cfg: &ExperimentConfig) -> EvalOutput {
    cmd_generate(cfg).unwrap();
    cmd_train(cfg, &mut |_| {}).unwrap();
    cmd_laplace(cfg).unwrap();
    cmd_evaluate(cfg).unwrap()
}
