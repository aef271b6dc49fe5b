//! Canonical on-disk artifact forms. JSON is written with sorted keys and
//! every float rounded to nine significant digits; CSV floats use the same
//! precision. Two runs with the same config must produce byte-identical
//! files, so nothing here may depend on iteration order or thread timing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use chrono::NaiveDate;
use mobility_core::discovery::{SwapRule, Thresholds};
use mobility_core::gmm::MixtureDensity;
use mobility_core::linalg::{Mat2, Vec2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Round to nine significant digits through the decimal representation.
pub fn round_sig(v: f64) -> f64 {
    format!("{v:.8e}").parse().expect("formatted float reparses")
}

/// Nine-significant-digit float for CSV cells.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

fn canonicalize(value: Value) -> Result<Value> {
    Ok(match value {
        Value::Number(n) => {
            if n.is_f64() {
                let rounded = round_sig(n.as_f64().expect("checked f64"));
                Value::Number(
                    serde_json::Number::from_f64(rounded)
                        .ok_or_else(|| anyhow!("non-finite float in artifact"))?,
                )
            } else {
                Value::Number(n)
            }
        }
        Value::Array(items) => {
            Value::Array(items.into_iter().map(canonicalize).collect::<Result<_>>()?)
        }
        Value::Object(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| Ok((k, canonicalize(v)?)))
                .collect::<Result<_>>()?,
        ),
        other => other,
    })
}

/// Serialize with sorted keys, rounded floats, and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let canon = canonicalize(serde_json::to_value(value)?)?;
    let mut text = serde_json::to_string_pretty(&canon)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_canonical_json(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output dir {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| {
        format!(
            "reading {} (run the stage that produces it first)",
            path.display()
        )
    })?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

// --- artifact schemas -------------------------------------------------------

/// Density model used for a catalog, with its full settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Truncated stick-breaking mixture fitted variationally.
    Dp {
        concentration: f64,
        truncation: usize,
        tol: f64,
        max_iter: usize,
        weight_floor: f64,
    },
    /// Fixed-size mixture fitted by expectation-maximization.
    Em { k: usize, tol: f64, max_iter: usize },
}

/// Global factors of a fitted variational posterior — enough to re-extract
/// a mixture under a different weight floor without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGlobals {
    pub stick_a: Vec<f64>,
    pub stick_b: Vec<f64>,
    pub means: Vec<Vec2>,
    pub mean_scales: Vec<f64>,
    pub scales: Vec<Mat2>,
    pub dofs: Vec<f64>,
    pub elbo: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmSummary {
    pub mean_log_likelihood: f64,
    pub iterations: usize,
}

/// One day's cached fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayFit {
    pub mixture: MixtureDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<PosteriorGlobals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<EmSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub day_id: NaiveDate,
    pub reason: String,
}

/// The per-day density catalog: the cache every later stage runs from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogArtifact {
    pub user_id: String,
    pub min_points: usize,
    pub model: ModelSpec,
    pub seed: u64,
    pub days: BTreeMap<NaiveDate, DayFit>,
    pub skipped: Vec<SkippedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub id: usize,
    pub representative_day: NaiveDate,
    pub members: Vec<NaiveDate>,
}

/// Discovered grouping plus everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternsArtifact {
    pub thresholds: Thresholds,
    pub mc_samples: usize,
    pub seed: u64,
    pub swap_rule: SwapRule,
    pub patterns: Vec<PatternEntry>,
}
