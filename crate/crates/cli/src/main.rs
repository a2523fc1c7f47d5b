use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use eimvr_cli::commands;
use eimvr_cli::{with_threads, ExperimentConfig, Overrides, Result};

#[derive(Parser)]
#[command(name = "eimvr", version, about = "Variance-reduced homogenization of random disk composites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the microstructure ensemble.
    Generate(Common),
    /// Surrogate and full-field solves followed by the control-variate estimate.
    Estimate(Common),
    /// Repeat the estimate over `chi_list` on one shared ensemble.
    SweepContrast(Common),
    /// Compare the families of `family_initial_fractions`.
    Discriminate(Common),
    /// Check the periodic influence tensors on the reference disk pair.
    ValidateInfluence(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file whose keys mirror the configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    truncation_p: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let overrides = Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            threads: self.threads,
            grid: self.grid,
            truncation_p: self.truncation_p,
        };
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = c.load()?;
            let members = with_threads(cfg.threads, || commands::generate(&cfg))??;
            println!("{} microstructures in {}", members.len(), cfg.out_dir.display());
        }
        Command::Estimate(c) => {
            let cfg = c.load()?;
            let summary = with_threads(cfg.threads, || commands::estimate(&cfg))??;
            println!("{:>4} {:>12} {:>10} {:>12} {:>10} {:>8} {:>8}", "comp", "plain", "ci", "reduced", "ci", "eff", "eff.eff");
            for c in &summary.components {
                let e = &c.estimate;
                println!(
                    "{:>4} {:>12.6} {:>10.2e} {:>12.6} {:>10.2e} {:>8.3} {:>8.3}",
                    c.component, e.plain_mean, e.plain_ci_halfwidth, e.mean, e.total_ci_halfwidth, e.efficiency_index, e.effective_efficiency_index
                );
            }
        }
        Command::SweepContrast(c) => {
            let cfg = c.load()?;
            let rows = with_threads(cfg.threads, || commands::sweep_contrast(&cfg))??;
            println!("{} rows in {}", rows.len(), cfg.out_dir.join("sweep.csv").display());
        }
        Command::Discriminate(c) => {
            let cfg = c.load()?;
            let report = with_threads(cfg.threads, || commands::discriminate(&cfg))??;
            print!("{}", report.table());
        }
        Command::ValidateInfluence(c) => {
            let cfg = c.load()?;
            let out = cfg.out_dir.clone();
            let report = with_threads(cfg.threads, || commands::validate_influence(Some(&out)))??;
            print!("{}", report.table());
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            error!("validation failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
