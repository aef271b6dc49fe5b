//! `mobility-miner`: discover recurring daily mobility patterns in GPS
//! traces. Each subcommand is one pipeline stage; stages communicate
//! through canonical artifacts in the output directory, so any stage can be
//! re-run from cached results. Identical config and seed give byte-identical
//! artifacts.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(
    name = "mobility-miner",
    version,
    about = "Discover recurring daily mobility patterns from GPS point sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a raw GPS CSV into the per-day dataset artifact.
    Ingest(CommonArgs),
    /// Fit a density to every fittable day and cache mixtures + posteriors.
    Fit(FitArgs),
    /// Estimate both divergence directions for every pair of fitted days.
    Divergence(CommonArgs),
    /// Group days into recurring patterns from the cached catalog.
    Discover(CommonArgs),
    /// Score fixed-size fits against the nonparametric fit on held-out points.
    CompareModels(CompareArgs),
    /// Measure how the pattern count grows with the observation span.
    Curve(CurveArgs),
    /// Generate a labeled synthetic dataset, optionally running the full
    /// pipeline on it and scoring recovery.
    Synth(SynthArgs),
}

/// Flags shared by every subcommand; each overrides one config field.
#[derive(Args, Debug)]
struct Overrides {
    /// JSON config document; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw GPS CSV (consumed by ingest).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory artifacts are written to and read from.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Seed for randomized stages; they refuse to run without one.
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum points a day needs to be fitted.
    #[arg(long)]
    min_points: Option<usize>,
    /// Monte Carlo draws per divergence direction.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Truncation level of the nonparametric mixture.
    #[arg(long)]
    truncation: Option<usize>,
    /// Concentration of the stick-breaking prior.
    #[arg(long)]
    concentration: Option<f64>,
    /// Smallest expected weight kept when extracting a mixture.
    #[arg(long)]
    weight_floor: Option<f64>,
    /// Admission threshold on the smaller divergence direction.
    #[arg(long)]
    lower_threshold: Option<f64>,
    /// Admission threshold on the larger divergence direction.
    #[arg(long)]
    upper_threshold: Option<f64>,
    /// Worker threads for per-day and per-pair work (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(self.config.as_deref())?;
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = self.min_points {
            cfg.min_points = v;
        }
        if let Some(v) = self.mc_samples {
            cfg.mc_samples = v;
        }
        if let Some(v) = self.truncation {
            cfg.truncation = v;
        }
        if let Some(v) = self.concentration {
            cfg.concentration = v;
        }
        if let Some(v) = self.weight_floor {
            cfg.weight_floor = v;
        }
        if let Some(v) = self.lower_threshold {
            cfg.lower_threshold = v;
        }
        if let Some(v) = self.upper_threshold {
            cfg.upper_threshold = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct CommonArgs {
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Fit a fixed K-component mixture by EM instead of the nonparametric model.
    #[arg(long, value_name = "K")]
    gmm: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Comma-separated fixed mixture sizes to fit (default 1..5).
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Fraction of each day's points held out for scoring.
    #[arg(long)]
    holdout: Option<f64>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Comma-separated window lengths in days.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
    /// Windows sampled per length.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Also fit, discover, and score recovery against the known labels.
    #[arg(long)]
    pipeline: bool,
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(a) => commands::cmd_ingest(&a.overrides.resolve()?),
        Command::Fit(a) => commands::cmd_fit(&a.overrides.resolve()?, a.gmm),
        Command::Divergence(a) => commands::cmd_divergence(&a.overrides.resolve()?),
        Command::Discover(a) => commands::cmd_discover(&a.overrides.resolve()?),
        Command::CompareModels(a) => {
            let mut cfg = a.overrides.resolve()?;
            if let Some(ks) = a.ks {
                cfg.em_ks = ks;
            }
            if let Some(h) = a.holdout {
                cfg.holdout_fraction = h;
            }
            cfg.validate()?;
            commands::cmd_compare_models(&cfg)
        }
        Command::Curve(a) => {
            let mut cfg = a.overrides.resolve()?;
            if let Some(lengths) = a.lengths {
                cfg.curve_lengths = lengths;
            }
            if let Some(repeats) = a.repeats {
                cfg.curve_repeats = repeats;
            }
            cfg.validate()?;
            commands::cmd_curve(&cfg)
        }
        Command::Synth(a) => commands::cmd_synth(&a.overrides.resolve()?, a.pipeline),
    }
}

/// Errors leave on stderr as exactly one JSON line: `{"error": "..."}`.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            return ExitCode::from(2);
        }
        Err(e) => {
            // --help and --version print normally and exit cleanly.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
