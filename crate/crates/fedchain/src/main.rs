//! `fedchain` command-line tool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fedchain::artifacts::{load_snapshot, run_to_dir, DirOptions, RunError};
use fedchain::config::{ConfigError, ExperimentConfig};
use fedchain::keyfiles::write_keys;
use fedchain::simnet::{committee_keys, SimError};
use fedchain::sweep::{run_sweep, SweepError};
use fedchain::{presets, simnet};
use fedchain_core::secure_agg::{CryptoContext, CryptoParams};

#[derive(Debug, Parser)]
#[command(
    name = "fedchain",
    version,
    about = "Ledger-coordinated federated learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate key material for the configured hospitals.
    Keygen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces `sim.seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the generated datasets as CSV.
        #[arg(long)]
        datasets: bool,
    },
    /// Run a bundled parameter sweep.
    Sweep {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(presets::names()))]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the DAG of a finished run.
    DagExport {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: 2,
            message: format!("config error: {e}"),
        }
    }
}

fn failure(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Sim(SimError::Config(c)) => c.into(),
            other => failure(other),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config { source, .. } => source.into(),
            SweepError::Run { source, .. } => source.into(),
            other => failure(other),
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    Ok(cfg)
}

fn keygen(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = load(config, None)?;
    let params = CryptoParams::derive(&cfg.param_request())
        .map_err(|e| failure(format!("invalid crypto parameters: {e}")))?;
    let ctx = CryptoContext::new(params).map_err(failure)?;
    let keys = committee_keys(&cfg, &ctx, cfg.sim.hospitals, 0).map_err(failure)?;
    let paths = write_keys(out, &keys, &params).map_err(failure)?;
    println!("params digest {}", hex::encode(params.digest()));
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn run(config: &Path, out: &Path, seed: Option<u64>, datasets: bool) -> Result<(), Failure> {
    let cfg = load(config, seed)?;
    let opts = DirOptions {
        datasets,
        run: simnet::RunOptions::default(),
    };
    let output = run_to_dir(&cfg, out, &opts)?;
    let last = output.metrics.last();
    println!(
        "{} rounds, accuracy {:.4}, confirmed {}, {}",
        output.metrics.len(),
        last.map_or(f64::NAN, |m| m.global_accuracy),
        last.map_or(0, |m| m.confirmed_tx),
        output.stop.label()
    );
    Ok(())
}

fn sweep(preset: &str, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let preset =
        presets::load(preset).ok_or_else(|| failure(format!("unknown preset {preset}")))?;
    for row in run_sweep(&preset, out, seed)? {
        println!(
            "{}={} accuracy {:.4} wall {:.1} ms",
            preset.parameter, row.value, row.final_accuracy, row.wall_time_ms
        );
    }
    Ok(())
}

fn dag_export(run: &Path, format: Format) -> Result<(), Failure> {
    let snapshot = load_snapshot(run)?;
    match format {
        Format::Dot => print!("{}", snapshot.to_dot()),
        Format::Json => println!("{}", snapshot.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Keygen { config, out } => keygen(config, out),
        Command::Run {
            config,
            out,
            seed,
            datasets,
        } => run(config, out, *seed, *datasets),
        Command::Sweep { preset, out, seed } => sweep(preset, out, *seed),
        Command::DagExport { run, format } => dag_export(run, *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fedchain: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
