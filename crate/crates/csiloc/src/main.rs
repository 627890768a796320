//! csiloc: single-access-point WiFi fingerprint localization pipeline.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use csiloc::config::{ConfigParseError, RunConfig};
use csiloc::manifest;
use csiloc::stages::{self, Artifacts};

#[derive(Parser)]
#[command(
    name = "csiloc",
    version,
    about = "WiFi CSI indoor localization: simulate, train, track, evaluate"
)]
struct Cli {
    /// Run directory all artifacts live in.
    #[arg(long, global = true, default_value = "run")]
    dir: PathBuf,
    /// Configuration file of key=value lines; overrides apply on top.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// One key=value override; may repeat, later wins.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Capture profile: nic or phone.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Root seed every stage derives its randomness from.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Manifest file; defaults to manifest.txt in the run directory.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Overwrite existing artifacts.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a site: raw survey, held-out, and test route databases.
    Synth {
        /// Survey grid spacing in meters.
        #[arg(long)]
        grid: Option<f64>,
    },
    /// Fit the normalization context and preprocess the raw databases.
    Preprocess,
    /// Train the location quantifier on the preprocessed survey.
    TrainCnn,
    /// Run the survey through the quantifier and store the fingerprints.
    ExtractFeatures,
    /// Sample bounded random walks for tracker training.
    GenTraj,
    /// Train the trajectory tracker on generated walks.
    TrainLstm,
    /// Replay the raw test routes and write per-point errors.
    Evaluate {
        /// Locate each capture independently, skipping the tracker.
        #[arg(long)]
        cnn_only: bool,
    },
    /// Compare raw-image and fingerprint ambiguity across the grid.
    Ambiguity,
    /// Summarize labeled error files into one table.
    Report {
        /// label=errors.csv pairs.
        #[arg(value_name = "LABEL=ERRORS_CSV", required = true)]
        inputs: Vec<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

/// Map failures onto stable exit codes: 2 configuration, 3 missing or
/// corrupt data, 4 numeric breakdown.
fn exit_code(err: &anyhow::Error) -> i32 {
    use csiloc_core::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::Usage(_) => 2,
                Error::NonFinite(_) => 4,
                Error::Shape(_) | Error::Inconsistent(_) => 3,
            };
        }
        if cause.downcast_ref::<ConfigParseError>().is_some() {
            return 2;
        }
    }
    3
}

/// Honor the thread-count variable. The compute kernels are
/// single-threaded, so anything above one only earns a note.
fn check_threads() -> Result<()> {
    match std::env::var("CSILOC_THREADS") {
        Ok(v) => {
            let n: usize = v.parse().map_err(|_| {
                anyhow::Error::new(ConfigParseError(format!(
                    "CSILOC_THREADS='{v}' is not a thread count"
                )))
            })?;
            if n == 0 {
                bail!(ConfigParseError("CSILOC_THREADS must be at least 1".into()));
            }
            if n > 1 {
                eprintln!("note: kernels run single-threaded; CSILOC_THREADS={n} caps at 1");
            }
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    check_threads()?;
    let mut sets = cli.sets.clone();
    if let Some(p) = &cli.profile {
        sets.push(format!("profile={p}"));
    }
    if let Some(s) = cli.seed {
        sets.push(format!("seed={s}"));
    }
    if let Command::Synth { grid: Some(g) } = &cli.command {
        sets.push(format!("grid={g}"));
    }
    let cfg = RunConfig::from_sources(cli.config.as_deref(), &sets)?;

    let arts = Artifacts::new(&cli.dir);
    let start = Instant::now();
    match &cli.command {
        Command::Synth { .. } => stages::synth(&cfg, &arts, cli.force)?,
        Command::Preprocess => stages::preprocess_stage(&cfg, &arts, cli.force)?,
        Command::TrainCnn => stages::train_cnn_stage(&cfg, &arts, cli.force)?,
        Command::ExtractFeatures => stages::extract_features_stage(&cfg, &arts, cli.force)?,
        Command::GenTraj => stages::gen_traj_stage(&cfg, &arts, cli.force)?,
        Command::TrainLstm => stages::train_lstm_stage(&cfg, &arts, cli.force)?,
        Command::Evaluate { cnn_only } => {
            stages::evaluate_stage(&cfg, &arts, *cnn_only, cli.force)?;
        }
        Command::Ambiguity => {
            stages::ambiguity_stage(&cfg, &arts, cli.force)?;
        }
        Command::Report { inputs } => {
            let mut pairs = Vec::with_capacity(inputs.len());
            for raw in inputs {
                let (label, path) = raw.split_once('=').ok_or_else(|| {
                    anyhow::Error::new(ConfigParseError(format!(
                        "report input '{raw}' is not label=path"
                    )))
                })?;
                pairs.push((label.to_string(), PathBuf::from(path)));
            }
            stages::report_stage(&arts, &pairs, cli.force)?;
        }
    }

    let command_line: Vec<String> = std::env::args().skip(1).collect();
    let manifest_path = cli.manifest.clone().unwrap_or_else(|| arts.manifest());
    manifest::append(&manifest_path, &command_line.join(" "), &cfg, start.elapsed())?;
    Ok(())
}
