use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use steinhaus_lab::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use steinhaus_lab::Error;

#[derive(Debug, Parser)]
#[command(
    name = "steinhaus-lab",
    version,
    about = "Intermittency experiments for exp(g|S_N|^2)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration; defaults to the built-in sweep.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV destination; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Omit the timestamp comment so output is byte-identical across runs.
    #[arg(long, global = true)]
    reproducible: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Exact and asymptotic ensemble mean gain.
    MeanGain,
    /// Saddle point of the rate function for g > 1.
    Saddle,
    /// Spatial versus ensemble mean of the field.
    ScanErgodicity,
    /// Power-mean chain, exceedance and concentration statistics.
    ScanChain,
    /// Grid sup-norm against the almost-sure bound.
    Supnorm,
    /// Quadrature, moment series and Monte Carlo cross-check.
    OracleCheck,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::MeanGain => ExperimentKind::MeanGain,
            Command::Saddle => ExperimentKind::Saddle,
            Command::ScanErgodicity => ExperimentKind::ScanErgodicity,
            Command::ScanChain => ExperimentKind::ScanChain,
            Command::Supnorm => ExperimentKind::Supnorm,
            Command::OracleCheck => ExperimentKind::OracleCheck,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Domain(_) | Error::Numeric(_) | Error::Resource(_) | Error::Usage(_) => 3,
        Error::Io(_) => 1,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let kind = cli.command.kind();
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default_for(kind),
    };
    if config.kind != kind {
        return Err(Error::Config(format!(
            "config describes a '{}' experiment but '{kind}' was requested",
            config.kind
        )));
    }
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    if cli.workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = load_config(cli)?;
    let table = run_experiment(&config, cli.workers)?;
    let mut out: Box<dyn Write> = match &config.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    if !cli.reproducible {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# {} generated_unix={secs}", config.kind)?;
    }
    table.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("steinhaus-lab: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
