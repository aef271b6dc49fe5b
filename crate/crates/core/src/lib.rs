//! Discovery of recurring daily mobility patterns from raw GPS traces.
//!
//! The pipeline: ingest per-user GPS fixes and segment them into calendar
//! days ([`trajectory`]), fit each day's spatial density with a truncated
//! stick-breaking mixture ([`dpmm`], with a fixed-size EM baseline in
//! [`gmm`]), measure day-to-day dissimilarity by Monte Carlo
//! Kullback–Leibler estimates ([`kl`]), and group days whose densities
//! recur ([`discovery`]). A synthetic trace generator with known day labels
//! lives in [`synth`].

pub mod discovery;
pub mod dpmm;
pub mod error;
pub mod gmm;
pub mod kl;
pub mod linalg;
pub mod seeding;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};

/// Fewest points a day may carry and still support a density fit.
pub const MIN_FIT_POINTS: usize = 10;
