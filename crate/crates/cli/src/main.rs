//! `effiq`: trip energy-efficiency prediction with uncertainty, one pipeline
//! stage per subcommand.

mod config;
mod pipeline;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use pipeline::Layout;

#[derive(Parser)]
#[command(
    name = "effiq",
    version,
    about = "Per-trip energy efficiency prediction with deep ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

/// Overrides applied on top of the defaults and the config file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// flat key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    members: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long = "adv-eps", global = true)]
    adv_eps: Option<f64>,
    #[arg(long, global = true)]
    clusters: Option<usize>,
    #[arg(long = "train-frac", global = true)]
    train_frac: Option<f64>,
    /// ICE, HEV, PHEV, EV or all
    #[arg(long = "vehicle-type", global = true)]
    vehicle_type: Option<String>,
    /// fuel, battery or all
    #[arg(long, global = true)]
    energy: Option<String>,
    /// run directory holding every stage's outputs
    #[arg(long, global = true, default_value = "effiq_run")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset in the published file format
    Synth,
    /// Parse dynamic and static CSVs into trips
    Ingest {
        /// directory of input CSVs; defaults to the synth output
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compute per-trip energy and efficiency labels
    Label,
    /// Cluster trips and build per-task feature tables
    Featurize,
    /// Month-stratified train/test split
    Split,
    /// Learning-rate grid search on the training split
    Gridsearch,
    /// Train the ensemble and the baselines
    Train,
    /// Predict the test split with every trained model
    Predict,
    /// Score predictions, optionally adding external prediction files
    Evaluate {
        #[arg(long)]
        external: Vec<PathBuf>,
    },
    /// Write SVG figures
    Report,
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Ingest { .. } => "ingest",
            Command::Label => "label",
            Command::Featurize => "featurize",
            Command::Split => "split",
            Command::Gridsearch => "gridsearch",
            Command::Train => "train",
            Command::Predict => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::Report => "report",
        }
    }
}

fn resolve(flags: &Flags) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    let pairs = [
        ("seed", flags.seed.map(|v| v.to_string())),
        ("members", flags.members.map(|v| v.to_string())),
        ("epochs", flags.epochs.map(|v| v.to_string())),
        ("batch", flags.batch.map(|v| v.to_string())),
        ("lr", flags.lr.map(|v| v.to_string())),
        ("adv_eps", flags.adv_eps.map(|v| v.to_string())),
        ("clusters", flags.clusters.map(|v| v.to_string())),
        ("train_frac", flags.train_frac.map(|v| v.to_string())),
        ("vehicle_type", flags.vehicle_type.clone()),
        ("energy", flags.energy.clone()),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.flags)?;
    let layout = Layout::new(&cli.flags.out);
    match &cli.command {
        Command::Synth => pipeline::synth(&cfg, &layout),
        Command::Ingest { input } => pipeline::ingest(&cfg, &layout, input.as_deref()),
        Command::Label => pipeline::label(&cfg, &layout),
        Command::Featurize => pipeline::featurize(&cfg, &layout),
        Command::Split => pipeline::split(&cfg, &layout),
        Command::Gridsearch => pipeline::gridsearch(&cfg, &layout),
        Command::Train => pipeline::train(&cfg, &layout),
        Command::Predict => pipeline::predict(&cfg, &layout),
        Command::Evaluate { external } => pipeline::evaluate(&cfg, &layout, external),
        Command::Report => pipeline::report(&cfg, &layout),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = cli.command.stage();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("effiq {stage}: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
