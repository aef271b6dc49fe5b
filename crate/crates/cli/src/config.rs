//! One JSON document configures the whole pipeline. Every field has a
//! built-in default, a config file overrides the defaults, and command-line
//! flags override the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mobility_core::discovery::{
    SwapRule, Thresholds, DEFAULT_LOWER_THRESHOLD, DEFAULT_UPPER_THRESHOLD,
};
use mobility_core::dpmm::{
    DEFAULT_CONCENTRATION, DEFAULT_TRUNCATION, DEFAULT_VI_MAX_ITER, DEFAULT_VI_TOL,
    DEFAULT_WEIGHT_FLOOR,
};
use mobility_core::gmm::{DEFAULT_EM_MAX_ITER, DEFAULT_EM_TOL};
use mobility_core::kl::{DEFAULT_MC_SAMPLES, McConfig};
use mobility_core::synth::GeneratorConfig;
use mobility_core::trajectory::ProjectionConfig;
use mobility_core::MIN_FIT_POINTS;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Raw GPS CSV consumed by `ingest`; later stages read artifacts from
    /// `output_dir` under fixed names.
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub projection: ProjectionConfig,
    /// Days with fewer points than this are skipped (with a reason).
    pub min_points: usize,
    pub concentration: f64,
    pub truncation: usize,
    pub vi_tol: f64,
    pub vi_max_iter: usize,
    pub weight_floor: f64,
    /// Fixed mixture sizes fitted by `compare-models`.
    pub em_ks: Vec<usize>,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub mc_samples: usize,
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    pub swap_rule: SwapRule,
    /// Fraction of each day's points held out by `compare-models`.
    pub holdout_fraction: f64,
    pub curve_lengths: Vec<usize>,
    pub curve_repeats: usize,
    /// Worker threads for per-day and per-pair work; 0 means all cores.
    pub workers: usize,
    /// Seed for every randomized stage. Required there — commands never
    /// fall back to the clock.
    pub seed: Option<u64>,
    /// Generator settings consumed by `synth`.
    pub synth: Option<GeneratorConfig>,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            input: None,
            output_dir: PathBuf::from("out"),
            projection: ProjectionConfig::raw_degrees(),
            min_points: MIN_FIT_POINTS,
            concentration: DEFAULT_CONCENTRATION,
            truncation: DEFAULT_TRUNCATION,
            vi_tol: DEFAULT_VI_TOL,
            vi_max_iter: DEFAULT_VI_MAX_ITER,
            weight_floor: DEFAULT_WEIGHT_FLOOR,
            em_ks: vec![1, 2, 3, 4, 5],
            em_tol: DEFAULT_EM_TOL,
            em_max_iter: DEFAULT_EM_MAX_ITER,
            mc_samples: DEFAULT_MC_SAMPLES,
            lower_threshold: DEFAULT_LOWER_THRESHOLD,
            upper_threshold: DEFAULT_UPPER_THRESHOLD,
            swap_rule: SwapRule::default(),
            holdout_fraction: 0.2,
            curve_lengths: vec![10, 25, 50, 75, 100],
            curve_repeats: 5,
            workers: 0,
            seed: None,
            synth: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_points == 0 {
            bail!("min_points must be at least 1");
        }
        if self.truncation < 2 {
            bail!("truncation must be at least 2");
        }
        if self.mc_samples == 0 {
            bail!("mc_samples must be at least 1");
        }
        if self.em_ks.is_empty() || self.em_ks.contains(&0) {
            bail!("em_ks must list at least one positive mixture size");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            bail!("holdout_fraction must lie strictly between 0 and 1");
        }
        if self.curve_repeats == 0 {
            bail!("curve_repeats must be at least 1");
        }
        // Threshold and floor ranges are enforced by the owning types.
        Thresholds::new(self.lower_threshold, self.upper_threshold)?;
        if let Some(synth) = &self.synth {
            synth.validate()?;
        }
        Ok(())
    }

    /// The explicit seed, or an error naming the fix.
    pub fn seed(&self) -> Result<u64> {
        self.seed.context("this command is randomized: set \"seed\" in the config or pass --seed")
    }

    pub fn mc(&self) -> Result<McConfig> {
        Ok(McConfig::new(self.mc_samples, self.seed()?)?)
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Ok(Thresholds::new(self.lower_threshold, self.upper_threshold)?)
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}
