//! Recurring-pattern discovery over a catalog of per-day densities.
//!
//! Days are clustered greedily: take the earliest unassigned day as a
//! pattern baseline, scan every later unassigned day, and admit a candidate
//! when both directions of its divergence against the baseline clear the
//! thresholds (the smaller direction under `lower`, the larger under
//! `upper`). An admitted candidate may take over as baseline, which lets a
//! pattern re-center on its most regular member; the final baseline is
//! reported as the pattern's representative day.

use crate::error::{Error, Result};
use crate::gmm::MixtureDensity;
use crate::kl::{kl_pair, DivergencePair, McConfig};
use crate::seeding::{day_salt, mix_seed};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

pub const DEFAULT_LOWER_THRESHOLD: f64 = 5.0;
pub const DEFAULT_UPPER_THRESHOLD: f64 = 100.0;

/// Admission thresholds: a candidate joins a pattern when the smaller
/// divergence direction is below `lower` and the larger is below `upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds")]
pub struct Thresholds {
    lower: f64,
    upper: f64,
}

#[derive(Deserialize)]
struct RawThresholds {
    lower: f64,
    upper: f64,
}

impl TryFrom<RawThresholds> for Thresholds {
    type Error = Error;
    fn try_from(raw: RawThresholds) -> Result<Thresholds> {
        Thresholds::new(raw.lower, raw.upper)
    }
}

impl Thresholds {
    pub fn new(lower: f64, upper: f64) -> Result<Thresholds> {
        if !(lower > 0.0 && lower.is_finite()) {
            return Err(Error::InvalidInput("lower threshold must be positive".into()));
        }
        if !(upper >= lower && upper.is_finite()) {
            return Err(Error::InvalidInput(
                "upper threshold must be at least the lower".into(),
            ));
        }
        Ok(Thresholds { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn admits(&self, pair: &DivergencePair) -> bool {
        pair.min() < self.lower && pair.max() < self.upper
    }
}

impl Default for Thresholds {
    fn default() -> Thresholds {
        Thresholds {
            lower: DEFAULT_LOWER_THRESHOLD,
            upper: DEFAULT_UPPER_THRESHOLD,
        }
    }
}

/// A day that could not enter the catalog, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedDay {
    pub day_id: NaiveDate,
    pub reason: String,
}

/// Per-day densities, ordered by date, plus the days that had to be skipped.
#[derive(Debug, Clone, Default)]
pub struct DensityCatalog {
    days: BTreeMap<NaiveDate, MixtureDensity>,
    skipped: Vec<SkippedDay>,
}

impl DensityCatalog {
    pub fn new() -> DensityCatalog {
        DensityCatalog::default()
    }

    pub fn insert(&mut self, day_id: NaiveDate, density: MixtureDensity) -> Result<()> {
        if self.days.contains_key(&day_id) {
            return Err(Error::DuplicateDay(day_id));
        }
        self.days.insert(day_id, density);
        Ok(())
    }

    pub fn skip(&mut self, day_id: NaiveDate, reason: impl Into<String>) {
        self.skipped.push(SkippedDay {
            day_id,
            reason: reason.into(),
        });
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn day_ids(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.days.keys().copied()
    }

    pub fn density(&self, day_id: NaiveDate) -> Option<&MixtureDensity> {
        self.days.get(&day_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, &MixtureDensity)> {
        self.days.iter().map(|(d, m)| (*d, m))
    }

    pub fn skipped(&self) -> &[SkippedDay] {
        &self.skipped
    }
}

/// One recurring pattern: its member days and the day whose density stands
/// for the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityPattern {
    pub representative_day: NaiveDate,
    pub members: Vec<NaiveDate>,
}

/// A partition of the catalog's days into patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    patterns: Vec<MobilityPattern>,
}

impl PatternSet {
    /// Assemble a pattern set, checking that members are non-empty and
    /// disjoint and that each representative belongs to its pattern.
    pub fn from_patterns(patterns: Vec<MobilityPattern>) -> Result<PatternSet> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &patterns {
            if p.members.is_empty() {
                return Err(Error::InvalidInput("pattern without members".into()));
            }
            if !p.members.contains(&p.representative_day) {
                return Err(Error::InvalidInput(format!(
                    "representative {} is not a member of its pattern",
                    p.representative_day
                )));
            }
            for &d in &p.members {
                if !seen.insert(d) {
                    return Err(Error::DuplicateDay(d));
                }
            }
        }
        Ok(PatternSet { patterns })
    }

    pub fn patterns(&self) -> &[MobilityPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Pattern index for every day, keyed by date.
    pub fn labels(&self) -> BTreeMap<NaiveDate, usize> {
        let mut out = BTreeMap::new();
        for (i, p) in self.patterns.iter().enumerate() {
            for &d in &p.members {
                out.insert(d, i);
            }
        }
        out
    }
}

/// Which admitted candidate takes over as the pattern baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwapRule {
    /// Swap when the baseline-to-candidate direction is the larger one.
    #[default]
    ForwardGreater,
    /// Swap when the baseline-to-candidate direction is the smaller one.
    ForwardSmaller,
}

/// Memoized pairwise divergences. The Monte Carlo seed for a pair is
/// derived from the configured seed and both dates, so an estimate does not
/// depend on when (or in which scan) it is first requested.
struct PairCache<'a> {
    catalog: &'a DensityCatalog,
    mc: McConfig,
    cache: HashMap<(NaiveDate, NaiveDate), DivergencePair>,
}

impl<'a> PairCache<'a> {
    fn new(catalog: &'a DensityCatalog, mc: McConfig) -> PairCache<'a> {
        PairCache {
            catalog,
            mc,
            cache: HashMap::new(),
        }
    }

    /// Forward direction is `D(density(a) || density(b))`.
    fn pair(&mut self, a: NaiveDate, b: NaiveDate) -> Result<DivergencePair> {
        if let Some(hit) = self.cache.get(&(a, b)) {
            return Ok(*hit);
        }
        let p = self.catalog.density(a).ok_or(Error::DuplicateDay(a))?;
        let q = self.catalog.density(b).ok_or(Error::DuplicateDay(b))?;
        let seed = mix_seed(self.mc.seed(), mix_seed(day_salt(a), day_salt(b)));
        let pair = kl_pair(p, q, &self.mc.with_seed(seed))?;
        self.cache.insert((a, b), pair);
        Ok(pair)
    }
}

/// Cluster the catalog's days into recurring patterns with the default
/// baseline-swap rule.
pub fn discover(catalog: &DensityCatalog, th: &Thresholds, mc: &McConfig) -> Result<PatternSet> {
    discover_with_rule(catalog, th, mc, SwapRule::default())
}

/// Cluster with an explicit swap rule. An empty catalog yields an empty
/// pattern set.
pub fn discover_with_rule(
    catalog: &DensityCatalog,
    th: &Thresholds,
    mc: &McConfig,
    rule: SwapRule,
) -> Result<PatternSet> {
    let mut cache = PairCache::new(catalog, *mc);
    discover_cached(catalog, th, rule, &mut cache)
}

fn discover_cached(
    catalog: &DensityCatalog,
    th: &Thresholds,
    rule: SwapRule,
    cache: &mut PairCache,
) -> Result<PatternSet> {
    let days: Vec<NaiveDate> = catalog.day_ids().collect();
    let mut assigned = vec![false; days.len()];
    let mut patterns = Vec::new();

    for start in 0..days.len() {
        if assigned[start] {
            continue;
        }
        assigned[start] = true;
        let mut members = vec![days[start]];
        let mut baseline = days[start];
        for (later, taken) in days.iter().zip(assigned.iter_mut()).skip(start + 1) {
            if *taken {
                continue;
            }
            let pair = cache.pair(baseline, *later)?;
            if !th.admits(&pair) {
                continue;
            }
            *taken = true;
            members.push(*later);
            let swap = match rule {
                SwapRule::ForwardGreater => pair.forward.value > pair.reverse.value,
                SwapRule::ForwardSmaller => pair.forward.value < pair.reverse.value,
            };
            if swap {
                baseline = *later;
            }
        }
        patterns.push(MobilityPattern {
            representative_day: baseline,
            members,
        });
    }

    PatternSet::from_patterns(patterns)
}

/// Shape statistics of a pattern set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub pattern_count: usize,
    /// Member count per pattern, in discovery order.
    pub member_counts: Vec<usize>,
    /// Cumulative fraction of patterns at or below each distinct size.
    pub ecdf: Vec<EcdfPoint>,
    pub singleton_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub size: usize,
    pub fraction: f64,
}

pub fn summarize(set: &PatternSet) -> PatternSummary {
    let member_counts: Vec<usize> = set.patterns().iter().map(|p| p.members.len()).collect();
    let total = member_counts.len();
    let mut sizes: Vec<usize> = member_counts.clone();
    sizes.sort_unstable();
    let mut ecdf = Vec::new();
    let mut seen = 0usize;
    let mut i = 0;
    while i < sizes.len() {
        let size = sizes[i];
        while i < sizes.len() && sizes[i] == size {
            seen += 1;
            i += 1;
        }
        ecdf.push(EcdfPoint {
            size,
            fraction: seen as f64 / total as f64,
        });
    }
    let singletons = member_counts.iter().filter(|&&c| c == 1).count();
    PatternSummary {
        pattern_count: total,
        member_counts,
        ecdf,
        singleton_fraction: if total == 0 {
            0.0
        } else {
            singletons as f64 / total as f64
        },
    }
}

/// One point on the observation-length curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthCurvePoint {
    pub length: usize,
    pub mean_patterns: f64,
    /// Population standard deviation over the repeats (0 for one repeat).
    pub std_patterns: f64,
}

/// How the number of discovered patterns grows with the observation span:
/// for each requested length, run discovery on `repeats` contiguous windows
/// of that many days (window starts drawn from `seed`) and report the mean
/// and spread of the pattern count. Divergences are memoized across
/// windows, so overlapping windows do not repeat Monte Carlo work.
pub fn varying_length_experiment(
    catalog: &DensityCatalog,
    th: &Thresholds,
    mc: &McConfig,
    lengths: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<LengthCurvePoint>> {
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be at least 1".into()));
    }
    let days: Vec<NaiveDate> = catalog.day_ids().collect();
    let mut cache = PairCache::new(catalog, *mc);
    let mut out = Vec::with_capacity(lengths.len());
    for &len in lengths {
        if len == 0 || len > days.len() {
            return Err(Error::InvalidInput(format!(
                "window length {len} outside 1..={}",
                days.len()
            )));
        }
        let mut rng = crate::seeding::rng_from_seed(mix_seed(seed, len as u64));
        let mut counts = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let offset = rand::Rng::random_range(&mut rng, 0..=days.len() - len);
            let mut window = DensityCatalog::new();
            for &d in &days[offset..offset + len] {
                window.insert(d, catalog.density(d).expect("day listed").clone())?;
            }
            // The shared cache stays valid: pair seeds depend only on dates.
            let mut window_cache = PairCache {
                catalog: &window,
                mc: *mc,
                cache: std::mem::take(&mut cache.cache),
            };
            let set = discover_cached(&window, th, SwapRule::default(), &mut window_cache)?;
            cache.cache = window_cache.cache;
            counts.push(set.len() as f64);
        }
        let mean = counts.iter().sum::<f64>() / repeats as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / repeats as f64;
        out.push(LengthCurvePoint {
            length: len,
            mean_patterns: mean,
            std_patterns: var.sqrt(),
        });
    }
    Ok(out)
}
