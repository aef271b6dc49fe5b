//! Synthetic traces with known day labels, for end-to-end validation.
//!
//! A route template is a loop of dwell anchors: most points scatter around
//! an anchor (chosen by dwell weight), the rest land along the legs between
//! consecutive anchors. Days cycle through the templates in blocks, so the
//! ground-truth day grouping is known exactly and recovery can be scored.

use crate::error::{Error, Result};
use crate::discovery::PatternSet;
use crate::linalg::Vec2;
use crate::seeding::{mix_seed, rng_from_seed};
use crate::trajectory::{DailyTrajectory, UserDataset};
use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_TRANSITION_FRACTION: f64 = 0.15;
pub const DEFAULT_POINTS_PER_DAY: (usize, usize) = (50, 500);

/// A dwell location within a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    /// Raw-degree coordinates (lat, lon).
    pub location: Vec2,
    /// Fraction of dwell points this anchor attracts; weights sum to one.
    pub dwell_weight: f64,
    /// Standard deviation of the isotropic scatter around the anchor.
    pub spread: f64,
}

/// A recurring daily route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTemplate {
    pub template_id: String,
    pub anchors: Vec<Anchor>,
    /// Scatter around the straight legs between consecutive anchors.
    pub transition_spread: f64,
}

impl RouteTemplate {
    fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::InvalidInput(format!(
                "template {:?} has no anchors",
                self.template_id
            )));
        }
        let mut sum = 0.0;
        for a in &self.anchors {
            if !a.location.is_finite() {
                return Err(Error::InvalidInput("anchor location must be finite".into()));
            }
            if a.dwell_weight.is_nan() || a.dwell_weight <= 0.0 {
                return Err(Error::InvalidInput("dwell weights must be positive".into()));
            }
            if !(a.spread > 0.0 && a.spread.is_finite()) {
                return Err(Error::InvalidInput("anchor spread must be positive".into()));
            }
            sum += a.dwell_weight;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "dwell weights of {:?} sum to {sum}",
                self.template_id
            )));
        }
        if !(self.transition_spread > 0.0 && self.transition_spread.is_finite()) {
            return Err(Error::InvalidInput("transition spread must be positive".into()));
        }
        Ok(())
    }
}

fn default_user_id() -> String {
    "synthetic".into()
}

fn default_start_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

fn default_points_per_day() -> (usize, usize) {
    DEFAULT_POINTS_PER_DAY
}

fn default_block_len() -> usize {
    1
}

fn default_transition_fraction() -> f64 {
    DEFAULT_TRANSITION_FRACTION
}

/// Full generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(default = "default_user_id")]
    pub user_id: String,
    #[serde(default = "default_start_day")]
    pub start_day: NaiveDate,
    pub templates: Vec<RouteTemplate>,
    /// Days generated per template; total days = templates * this.
    pub days_per_template: usize,
    /// Inclusive range for the per-day point count.
    #[serde(default = "default_points_per_day")]
    pub points_per_day: (usize, usize),
    /// Consecutive days assigned to one template before moving to the next.
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    /// Fraction of points drawn from legs instead of dwell anchors.
    #[serde(default = "default_transition_fraction")]
    pub transition_fraction: f64,
    /// Extra isotropic noise added to every point (0 disables).
    #[serde(default)]
    pub noise_scale: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::InvalidInput("at least one template required".into()));
        }
        for t in &self.templates {
            t.validate()?;
        }
        let mut ids: Vec<&str> = self.templates.iter().map(|t| t.template_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.templates.len() {
            return Err(Error::InvalidInput("template ids must be unique".into()));
        }
        if self.days_per_template == 0 {
            return Err(Error::InvalidInput("days_per_template must be nonzero".into()));
        }
        let (lo, hi) = self.points_per_day;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidInput(format!(
                "points_per_day range ({lo}, {hi}) is invalid"
            )));
        }
        if self.block_len == 0 {
            return Err(Error::InvalidInput("block_len must be nonzero".into()));
        }
        if !(0.0..1.0).contains(&self.transition_fraction) {
            return Err(Error::InvalidInput("transition_fraction must lie in [0, 1)".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidInput("noise_scale must be non-negative".into()));
        }
        Ok(())
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

fn clamp_degrees(p: Vec2) -> Vec2 {
    Vec2::new(p.x.clamp(-90.0, 90.0), p.y.clamp(-180.0, 180.0))
}

/// Generate the dataset plus the ground-truth template id for every day.
/// Each day derives its own seed from the config seed and the day index,
/// so output is reproducible and independent of generation order.
pub fn generate(cfg: &GeneratorConfig) -> Result<(UserDataset, BTreeMap<NaiveDate, String>)> {
    cfg.validate()?;
    let n_templates = cfg.templates.len();
    let total_days = cfg
        .days_per_template
        .checked_mul(n_templates)
        .ok_or_else(|| Error::InvalidInput("day count overflow".into()))?;

    let mut days = Vec::with_capacity(total_days);
    let mut truth = BTreeMap::new();
    for i in 0..total_days {
        let date = cfg
            .start_day
            .checked_add_days(Days::new(i as u64))
            .ok_or_else(|| Error::InvalidInput("date range overflow".into()))?;
        let template = &cfg.templates[(i / cfg.block_len) % n_templates];
        let mut rng = rng_from_seed(mix_seed(cfg.seed, i as u64));
        let n = rng.random_range(cfg.points_per_day.0..=cfg.points_per_day.1);
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let roll: f64 = rng.random();
            let mut p = if roll < cfg.transition_fraction && template.anchors.len() >= 2 {
                let i = rng.random_range(0..template.anchors.len());
                let j = (i + 1) % template.anchors.len();
                let s: f64 = rng.random();
                let a = template.anchors[i].location;
                let b = template.anchors[j].location;
                a + (b - a) * s + gauss(&mut rng) * template.transition_spread
            } else {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &template.anchors[template.anchors.len() - 1];
                for anchor in &template.anchors {
                    acc += anchor.dwell_weight;
                    if u < acc {
                        chosen = anchor;
                        break;
                    }
                }
                chosen.location + gauss(&mut rng) * chosen.spread
            };
            if cfg.noise_scale > 0.0 {
                p = p + gauss(&mut rng) * cfg.noise_scale;
            }
            points.push(clamp_degrees(p));
        }
        days.push(DailyTrajectory::new(date, points));
        truth.insert(date, template.template_id.clone());
    }

    Ok((UserDataset::new(cfg.user_id.clone(), days)?, truth))
}

/// Agreement between discovered patterns and ground-truth day labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    /// Fraction of day pairs on which the two groupings agree.
    pub rand_index: f64,
    pub found_patterns: usize,
    pub true_patterns: usize,
    pub days_scored: usize,
}

/// Rand index between the discovered partition and the truth labels,
/// computed over the days present in both (at least two required).
pub fn score_recovery(
    found: &PatternSet,
    truth: &BTreeMap<NaiveDate, String>,
) -> Result<RecoveryScore> {
    let found_labels = found.labels();
    let days: Vec<NaiveDate> = found_labels
        .keys()
        .filter(|d| truth.contains_key(d))
        .copied()
        .collect();
    if days.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two days shared by both groupings".into(),
        ));
    }
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..days.len() {
        for j in i + 1..days.len() {
            let same_found = found_labels[&days[i]] == found_labels[&days[j]];
            let same_truth = truth[&days[i]] == truth[&days[j]];
            if same_found == same_truth {
                agree += 1;
            }
            total += 1;
        }
    }
    let mut true_ids: Vec<&String> = days.iter().map(|d| &truth[d]).collect();
    true_ids.sort_unstable();
    true_ids.dedup();
    Ok(RecoveryScore {
        rand_index: agree as f64 / total as f64,
        found_patterns: found.len(),
        true_patterns: true_ids.len(),
        days_scored: days.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::MobilityPattern;
    use approx::assert_relative_eq;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, d).unwrap()
    }

    fn two_templates() -> Vec<RouteTemplate> {
        vec![
            RouteTemplate {
                template_id: "home-work".into(),
                anchors: vec![
                    Anchor {
                        location: Vec2::new(0.1, 0.1),
                        dwell_weight: 0.6,
                        spread: 0.01,
                    },
                    Anchor {
                        location: Vec2::new(0.5, 0.5),
                        dwell_weight: 0.4,
                        spread: 0.01,
                    },
                ],
                transition_spread: 0.005,
            },
            RouteTemplate {
                template_id: "errands".into(),
                anchors: vec![Anchor {
                    location: Vec2::new(0.9, 0.2),
                    dwell_weight: 1.0,
                    spread: 0.02,
                }],
                transition_spread: 0.005,
            },
        ]
    }

    fn config(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            user_id: default_user_id(),
            start_day: default_start_day(),
            templates: two_templates(),
            days_per_template: 3,
            points_per_day: (40, 60),
            block_len: 1,
            transition_fraction: DEFAULT_TRANSITION_FRACTION,
            noise_scale: 0.0,
            seed,
        }
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut c = config(1);
        c.templates.clear();
        assert!(c.validate().is_err());

        let mut c = config(1);
        c.templates[0].anchors[0].dwell_weight = 0.9; // sum != 1
        assert!(c.validate().is_err());

        let mut c = config(1);
        c.points_per_day = (10, 5);
        assert!(c.validate().is_err());

        let mut c = config(1);
        c.transition_fraction = 1.0;
        assert!(c.validate().is_err());

        let mut c = config(1);
        c.templates[1].template_id = "home-work".into();
        assert!(c.validate().is_err());

        assert!(config(1).validate().is_ok());
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let (ds1, truth1) = generate(&config(5)).unwrap();
        let (ds2, truth2) = generate(&config(5)).unwrap();
        assert_eq!(ds1, ds2);
        assert_eq!(truth1, truth2);
        let (ds3, _) = generate(&config(6)).unwrap();
        assert_ne!(ds1, ds3);
    }

    #[test]
    fn generation_covers_all_days_with_counts_in_range() {
        let (ds, truth) = generate(&config(9)).unwrap();
        assert_eq!(ds.n_days(), 6);
        assert_eq!(truth.len(), 6);
        for day in ds.days() {
            assert!((40..=60).contains(&day.point_count()));
            assert!(day.fittable(10));
        }
    }

    #[test]
    fn daily_cycling_alternates_templates() {
        let (_, truth) = generate(&config(3)).unwrap();
        let labels: Vec<&str> = (1..=6).map(|d| truth[&date(d)].as_str()).collect();
        assert_eq!(
            labels,
            vec!["home-work", "errands", "home-work", "errands", "home-work", "errands"]
        );
    }

    #[test]
    fn block_scheduling_groups_consecutive_days() {
        let mut cfg = config(3);
        cfg.block_len = 3;
        let (_, truth) = generate(&cfg).unwrap();
        let labels: Vec<&str> = (1..=6).map(|d| truth[&date(d)].as_str()).collect();
        assert_eq!(
            labels,
            vec!["home-work", "home-work", "home-work", "errands", "errands", "errands"]
        );
    }

    #[test]
    fn points_stay_near_the_template() {
        let mut cfg = config(12);
        cfg.transition_fraction = 0.0;
        let (ds, truth) = generate(&cfg).unwrap();
        for day in ds.days() {
            if truth[&day.day_id()] != "errands" {
                continue;
            }
            let anchor = Vec2::new(0.9, 0.2);
            for p in day.points() {
                // 0.02 spread: 10 sigma is a generous bound.
                assert!(((*p - anchor).norm_sq()).sqrt() < 0.2);
            }
        }
    }

    #[test]
    fn rand_index_hand_checked() {
        // Found: {1,2} {3,4}; truth: {1,2,3} {4}.
        let found = PatternSet::from_patterns(vec![
            MobilityPattern {
                representative_day: date(1),
                members: vec![date(1), date(2)],
            },
            MobilityPattern {
                representative_day: date(3),
                members: vec![date(3), date(4)],
            },
        ])
        .unwrap();
        let mut truth = BTreeMap::new();
        truth.insert(date(1), "x".to_string());
        truth.insert(date(2), "x".to_string());
        truth.insert(date(3), "x".to_string());
        truth.insert(date(4), "y".to_string());
        let score = score_recovery(&found, &truth).unwrap();
        // Agreements: (1,2), (1,4), (2,4) out of 6 pairs.
        assert_relative_eq!(score.rand_index, 0.5);
        assert_eq!(score.found_patterns, 2);
        assert_eq!(score.true_patterns, 2);
        assert_eq!(score.days_scored, 4);
    }

    #[test]
    fn rand_index_extremes() {
        let perfect = PatternSet::from_patterns(vec![
            MobilityPattern {
                representative_day: date(1),
                members: vec![date(1), date(2)],
            },
            MobilityPattern {
                representative_day: date(3),
                members: vec![date(3)],
            },
        ])
        .unwrap();
        let mut truth = BTreeMap::new();
        truth.insert(date(1), "a".to_string());
        truth.insert(date(2), "a".to_string());
        truth.insert(date(3), "b".to_string());
        assert_relative_eq!(score_recovery(&perfect, &truth).unwrap().rand_index, 1.0);

        // All singletons against one true cluster: no pair agrees.
        let all_split = PatternSet::from_patterns(
            (1..=3)
                .map(|d| MobilityPattern {
                    representative_day: date(d),
                    members: vec![date(d)],
                })
                .collect(),
        )
        .unwrap();
        let mut one = BTreeMap::new();
        for d in 1..=3 {
            one.insert(date(d), "a".to_string());
        }
        assert_relative_eq!(score_recovery(&all_split, &one).unwrap().rand_index, 0.0);
    }

    #[test]
    fn scoring_requires_shared_days() {
        let found = PatternSet::from_patterns(vec![MobilityPattern {
            representative_day: date(1),
            members: vec![date(1)],
        }])
        .unwrap();
        let mut truth = BTreeMap::new();
        truth.insert(date(9), "a".to_string());
        assert!(score_recovery(&found, &truth).is_err());
    }
}
