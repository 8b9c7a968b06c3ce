use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nssm_unc::config::ExperimentConfig;
use nssm_unc::pipeline;
use nssm_unc::CliResult;

#[derive(Parser)]
#[command(name = "nssm-unc", version, about = "Neural state-space identification with Laplace uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the training and test datasets and the Bode tables.
    Generate(Common),
    /// Fit the MAP parameters on the training set.
    Train(Common),
    /// Compute the Gauss-Newton Laplace posterior at the MAP estimate.
    Laplace(Common),
    /// Predict with uncertainty on the test sets and write the report.
    Evaluate(Common),
    /// Print the report next to the reference results.
    Report(Common),
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML). Missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reduced profile: shorter records, fewer epochs.
    #[arg(long)]
    fast: bool,
    /// Override the global seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.fast {
            cfg = cfg.fast();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(c) => {
            let m = pipeline::cmd_generate(&c.load()?)?;
            for d in &m.datasets {
                println!("{} {}", d.id, d.path.display());
            }
        }
        Command::Train(c) => {
            let cfg = c.load()?;
            let art = pipeline::cmd_train(&cfg, &mut |r| {
                eprintln!("epoch {:>4} {:<7} nll {:.6e}", r.epoch, format!("{:?}", r.phase).to_lowercase(), r.nll)
            })?;
            println!(
                "best nll {:.6e} at epoch {} ({:.1} s) -> {}",
                art.best_nll,
                art.best_epoch,
                art.wall_time_s.unwrap_or(0.0),
                cfg.model_path().display()
            );
        }
        Command::Laplace(c) => {
            let cfg = c.load()?;
            let p = pipeline::cmd_laplace(&cfg)?;
            println!(
                "posterior n_theta={} jitter={:e} log det H={:.4} -> {}",
                p.header.n_theta,
                p.header.jitter,
                p.header.log_det_precision,
                cfg.posterior_path().display()
            );
        }
        Command::Evaluate(c) => {
            let cfg = c.load()?;
            let out = pipeline::cmd_evaluate(&cfg)?;
            println!("signal,fit,coverage,surprise");
            for r in &out.reports {
                println!("{},{:.3},{:.3},{:.4}", r.signal_id, r.fit, r.coverage, r.surprise);
            }
        }
        Command::Report(c) => print!("{}", pipeline::cmd_report(&c.load()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
