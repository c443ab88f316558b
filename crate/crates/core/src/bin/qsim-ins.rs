use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qsim_ins::pipeline::{ExperimentConfig, Overrides, Pipeline, StageRecord};
use qsim_ins::Error;

#[derive(Parser)]
#[command(version, about = "Emulated spin-cluster dynamics, neutron cross-sections and concurrence")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped configuration: molecule-1, molecule-2, molecule-3 or trimer.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample this many shots per circuit.
    #[arg(long, global = true, conflicts_with = "noiseless")]
    shots: Option<usize>,
    /// Exact expectation values, no sampling.
    #[arg(long, global = true)]
    noiseless: bool,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact-diagonalization reference tables.
    Exact,
    /// Run the estimator circuits and write corrected series.
    Simulate,
    /// Fit shared frequencies to the series.
    Fit {
        /// Series directory (default: <out>/series).
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Energy spectrum, Q maps and Q cuts from a fitted model.
    CrossSection {
        /// Model file (default: <out>/fit/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Concurrence from a constant-energy Q cut.
    Concurrence {
        /// Cut file (default: <out>/cross_section/cut_peak<k>.csv).
        #[arg(long)]
        cut: Option<PathBuf>,
    },
    /// Every stage in order.
    RunAll,
}

fn load(common: &Common) -> Result<Pipeline, Error> {
    let mut config = match (&common.config, &common.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(Error::Config("one of --config or --preset is required".into())),
    };
    config.apply(&Overrides {
        seed: common.seed,
        shots: common.shots,
        noiseless: common.noiseless,
        output_dir: common.out_dir.clone(),
    })?;
    Pipeline::new(config)
}

fn report(record: &StageRecord) {
    println!("{}: {} files", record.name, record.outputs.len());
}

fn run(cli: Cli) -> Result<(), Error> {
    let pipeline = load(&cli.common)?;
    match cli.command {
        Command::Exact => report(&pipeline.exact()?),
        Command::Simulate => report(&pipeline.simulate()?),
        Command::Fit { series } => report(&pipeline.fit(series.as_deref())?),
        Command::CrossSection { model } => report(&pipeline.cross_section(model.as_deref())?),
        Command::Concurrence { cut } => {
            report(&pipeline.concurrence(cut.as_deref())?);
            let r = pipeline.read_report()?;
            println!("C = {:.4} ± {:.4} at E = {:.4} J", r.fit.concurrence, r.fit.stderr, r.energy);
        }
        Command::RunAll => {
            let manifest = pipeline.run_all()?;
            for stage in &manifest.stages {
                report(stage);
            }
        }
    }
    println!("outputs in {}", pipeline.output_dir().display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
