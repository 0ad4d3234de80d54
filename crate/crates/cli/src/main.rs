mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use stages::{Failure, Pipeline};

/// Hybrid call-graph bug-prediction pipeline.
#[derive(Parser)]
#[command(name = "callfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config document (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Confidence thresholds; overrides `thresholds` (repeatable).
    #[arg(long = "threshold", global = true)]
    thresholds: Vec<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build static call graphs and function spans from JavaScript sources.
    ExtractStatic,
    /// Convert tool outputs, static metrics and patches.
    Ingest,
    /// Merge tool graphs and assign per-cell confidence.
    Fuse,
    /// Hybrid invocation counts for each threshold.
    Metrics,
    /// Label functions and export the S, H and S+H datasets.
    Dataset,
    /// Cross-validate the model grid.
    Train,
    /// Rankings and paired feature-set tests.
    Report,
    /// Every stage from extract-static to report.
    All,
    /// Stratified edge sample to label for confidence estimation.
    Sample,
}

impl Command {
    fn stage(self) -> &'static str {
        match self {
            Command::ExtractStatic => "extract-static",
            Command::Ingest => "ingest",
            Command::Fuse => "fuse",
            Command::Metrics => "metrics",
            Command::Dataset => "dataset",
            Command::Train => "train",
            Command::Report => "report",
            Command::All => "all",
            Command::Sample => "sample",
        }
    }
}

fn load(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let config_err = |error| Failure::Stage {
        stage: "config",
        error,
    };
    let path = cli
        .config
        .clone()
        .ok_or_else(|| config_err(anyhow::anyhow!("--config is required")))?;
    let bytes = std::fs::read(&path).map_err(|_| Failure::Missing(path.clone()))?;
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let mut cfg = PipelineConfig::parse(&bytes, &base)
        .map_err(|e| config_err(e.context(path.display().to_string())))?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if !cli.thresholds.is_empty() {
        cfg.thresholds = cli.thresholds.clone();
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = load(&cli).and_then(|cfg| Pipeline { cfg }.run(cli.command.stage()));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("callfuse: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
