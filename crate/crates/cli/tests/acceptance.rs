//! Acceptance gate for the whole workspace: ten numbered criteria covering
//! estimator accuracy, optimizer invariants, recovery on synthetic routes,
//! model selection, and artifact determinism. Each test prints one
//! `criterion NN (...): PASS/FAIL` line (visible under `--nocapture`).

use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::process::{Command, Output};

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;

use mobility_core::discovery::{
    discover, varying_length_experiment, DensityCatalog, Thresholds,
};
use mobility_core::dpmm::{fit_variational, stick_lengths_to_weights, DpPrior, TruncationConfig};
use mobility_core::gmm::{fit_em, GaussianComponent, MixtureDensity};
use mobility_core::kl::{kl_gaussian_closed_form, kl_mc, kl_pair, McConfig};
use mobility_core::linalg::{Mat2, Vec2};
use mobility_core::seeding::{day_salt, mix_seed, rng_from_seed};
use mobility_core::synth::{generate, score_recovery, Anchor, GeneratorConfig, RouteTemplate};
use mobility_core::trajectory::UserDataset;

fn report(number: u32, label: &str, body: impl FnOnce()) {
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(body));
    match outcome {
        Ok(()) => println!("criterion {number:02} ({label}): PASS"),
        Err(cause) => {
            println!("criterion {number:02} ({label}): FAIL");
            std::panic::resume_unwind(cause);
        }
    }
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// A route template with one shared spread; anchors are (x, y, dwell weight).
fn route(id: &str, spread: f64, transition: f64, anchors: &[(f64, f64, f64)]) -> RouteTemplate {
    RouteTemplate {
        template_id: id.into(),
        anchors: anchors
            .iter()
            .map(|&(x, y, w)| Anchor {
                location: Vec2::new(x, y),
                dwell_weight: w,
                spread,
            })
            .collect(),
        transition_spread: transition,
    }
}

fn random_gaussian(rng: &mut impl Rng) -> GaussianComponent {
    let mean = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
    let a = Mat2([
        [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)],
        [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)],
    ]);
    let at = Mat2([[a.0[0][0], a.0[1][0]], [a.0[0][1], a.0[1][1]]]);
    let mut cov = a.mul_mat(&at);
    cov.0[0][0] += 0.3;
    cov.0[1][1] += 0.3;
    GaussianComponent::from_covariance(mean, cov).expect("positive definite by construction")
}

fn random_mixture(rng: &mut impl Rng, max_k: usize) -> MixtureDensity {
    let k = rng.random_range(1..=max_k);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total).collect();
    let comps = (0..k).map(|_| random_gaussian(rng)).collect();
    MixtureDensity::new(weights, comps).expect("valid mixture")
}

// ---------------------------------------------------------------------------
// 1. Monte Carlo estimates agree with the single-Gaussian closed form.

#[test]
fn criterion_01_monte_carlo_matches_the_closed_form() {
    report(1, "Monte Carlo divergence matches the closed form", || {
        let hits = (0..50u64)
            .into_par_iter()
            .filter(|&trial| {
                let mut rng = rng_from_seed(mix_seed(0xACC1, trial));
                let p = random_gaussian(&mut rng);
                let q = random_gaussian(&mut rng);
                let exact = kl_gaussian_closed_form(&p, &q);
                let mc = McConfig::new(100_000, 1_000 + trial).expect("valid settings");
                let est = kl_mc(
                    &MixtureDensity::single(p),
                    &MixtureDensity::single(q),
                    &mc,
                )
                .expect("estimate succeeds");
                (est.value - exact).abs() <= 4.0 * est.std_error
            })
            .count();
        assert!(hits >= 48, "only {hits}/50 pairs within four standard errors");
    });
}

// ---------------------------------------------------------------------------
// 2. A density compared with itself reports exactly zero, both directions.

#[test]
fn criterion_02_self_divergence_is_exactly_zero() {
    report(2, "self-divergence is exactly zero", || {
        for trial in 0..20u64 {
            let mut rng = rng_from_seed(mix_seed(0x5E1F, trial));
            let p = random_mixture(&mut rng, 4);
            let mc = McConfig::new(500, mix_seed(0x5E20, trial)).expect("valid settings");
            let pair = kl_pair(&p, &p, &mc).expect("estimate succeeds");
            assert_eq!(pair.forward.value, 0.0, "trial {trial}");
            assert_eq!(pair.reverse.value, 0.0, "trial {trial}");
            assert_eq!(pair.forward.std_error, 0.0, "trial {trial}");
            assert_eq!(pair.reverse.std_error, 0.0, "trial {trial}");
        }
    });
}

// ---------------------------------------------------------------------------
// 3. Every variational fit has a non-decreasing bound trace.

#[test]
fn criterion_03_variational_bound_is_monotone() {
    report(3, "variational bound never decreases", || {
        let gen = GeneratorConfig {
            user_id: "elbo".into(),
            start_day: date(2024, 3, 1),
            templates: vec![
                route("pair", 0.8, 0.4, &[(0.0, 0.0, 0.5), (10.0, 4.0, 0.5)]),
                route("home", 1.0, 0.5, &[(30.0, -20.0, 1.0)]),
                route("skew", 0.7, 0.4, &[(-25.0, 15.0, 0.4), (-18.0, 22.0, 0.6)]),
            ],
            days_per_template: 10,
            points_per_day: (80, 160),
            block_len: 1,
            transition_fraction: 0.15,
            noise_scale: 0.0,
            seed: 31,
        };
        let (dataset, _) = generate(&gen).expect("generator settings are valid");
        assert_eq!(dataset.n_days(), 30);
        for day in dataset.days() {
            let prior = DpPrior::from_data(day.points(), 1.0).expect("enough points");
            let cfg = TruncationConfig::new(12, 1e-6, 300, mix_seed(0xE1B0, day_salt(day.day_id())))
                .expect("valid settings");
            let post = fit_variational(day.points(), &prior, &cfg).expect("fit succeeds");
            let trace = post.elbo_trace();
            assert!(trace.len() >= 2, "{}: trace too short", day.day_id());
            for (i, w) in trace.windows(2).enumerate() {
                assert!(
                    w[1] >= w[0] - 1e-8,
                    "{}: bound dropped {} -> {} at step {i}",
                    day.day_id(),
                    w[0],
                    w[1]
                );
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 4. Three clusters separated by 30 sigma come back as exactly three
//    components with accurate means.

#[test]
fn criterion_04_well_separated_clusters_are_recovered() {
    report(4, "well-separated clusters are recovered", || {
        let centers = [Vec2::new(0.0, 0.0), Vec2::new(30.0, 0.0), Vec2::new(0.0, 30.0)];
        for trial in 0..10u64 {
            let mut points = Vec::new();
            for (k, &center) in centers.iter().enumerate() {
                let blob = GaussianComponent::from_covariance(center, Mat2::scaled_identity(1.0))
                    .expect("identity is positive definite");
                points.extend(
                    MixtureDensity::single(blob)
                        .sample(300, mix_seed(mix_seed(0xC4A0, trial), k as u64))
                        .expect("sampling succeeds"),
                );
            }
            let prior = DpPrior::from_data(&points, 1.0).expect("enough points");
            let cfg = TruncationConfig::new(10, 1e-6, 500, mix_seed(0xC4B0, trial))
                .expect("valid settings");
            let mixture = fit_variational(&points, &prior, &cfg)
                .expect("fit succeeds")
                .extract_mixture(0.05)
                .expect("floor keeps at least one component");
            assert_eq!(
                mixture.n_components(),
                3,
                "trial {trial}: got {} components",
                mixture.n_components()
            );
            for &center in &centers {
                let nearest = mixture
                    .components()
                    .iter()
                    .map(|c| (c.mean() - center).norm_sq())
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    nearest < 0.25,
                    "trial {trial}: no mean within 0.5 of {center:?}"
                );
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Binary helpers for the end-to-end criteria.

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobility-miner"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str], cwd: &Path) {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, name: &str, value: &serde_json::Value) {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(value).unwrap()).unwrap();
}

// ---------------------------------------------------------------------------
// 5. Model selection on heterogeneous days: the adaptive mixture's held-out
//    mean log-likelihood is never beaten by more than 0.05 nats by any
//    fixed component count.

#[test]
fn criterion_05_adaptive_mixture_leads_model_selection() {
    report(5, "adaptive mixture leads fixed-size models held out", || {
        let dir = tempfile::tempdir().unwrap();
        let config = serde_json::json!({
            "seed": 505,
            "output_dir": "hetero",
            "em_ks": [1, 2, 3, 4, 5],
            "holdout_fraction": 0.2,
            "truncation": 20,
            "vi_tol": 1e-6,
            "vi_max_iter": 400,
            "weight_floor": 0.01,
            "synth": {
                "user_id": "hetero",
                "start_day": "2024-01-01",
                "templates": [
                    route("one", 1.0, 0.5, &[(0.0, 0.0, 1.0)]),
                    route("two", 1.0, 0.5, &[(30.0, 0.0, 0.5), (38.0, 0.0, 0.5)]),
                    route("three", 1.0, 0.5,
                          &[(0.0, 40.0, 0.4), (8.0, 40.0, 0.3), (4.0, 47.0, 0.3)]),
                    route("four", 1.0, 0.5,
                          &[(-40.0, 0.0, 0.25), (-32.0, 0.0, 0.25),
                            (-40.0, 8.0, 0.25), (-32.0, 8.0, 0.25)]),
                    route("five", 1.0, 0.5,
                          &[(-30.0, -40.0, 0.2), (-22.0, -40.0, 0.2), (-26.0, -33.0, 0.2),
                            (-34.0, -33.0, 0.2), (-26.0, -47.0, 0.2)]),
                ],
                "days_per_template": 8,
                "points_per_day": [80, 140],
                "block_len": 1,
                "transition_fraction": 0.1,
                "noise_scale": 0.0,
                "seed": 321
            }
        });
        write_config(dir.path(), "config.json", &config);
        run_ok(&["synth", "--config", "config.json"], dir.path());
        run_ok(&["compare-models", "--config", "config.json"], dir.path());

        let table = std::fs::read_to_string(dir.path().join("hetero/compare-models.csv")).unwrap();
        let mut best_fixed = f64::NEG_INFINITY;
        let mut adaptive = None;
        for line in table.lines().skip(1) {
            let mut cells = line.split(',');
            let model = cells.next().unwrap();
            let mll: f64 = cells.next().unwrap().parse().unwrap();
            if model == "dp" {
                adaptive = Some(mll);
            } else {
                best_fixed = best_fixed.max(mll);
            }
        }
        let adaptive = adaptive.expect("table has a dp row");
        assert!(
            adaptive >= best_fixed - 0.05,
            "adaptive {adaptive} trails best fixed-size {best_fixed}"
        );
    });
}

// ---------------------------------------------------------------------------
// 6. Hand-built density geometry: similar / subset / disjoint pairs land in
//    the expected magnitude classes and discovery groups the days accordingly.

fn unit_blob(x: f64, y: f64) -> GaussianComponent {
    GaussianComponent::from_covariance(Vec2::new(x, y), Mat2::scaled_identity(1.0))
        .expect("identity is positive definite")
}

#[test]
fn criterion_06_divergence_classes_group_days_as_expected() {
    report(6, "divergence classes group days as expected", || {
        // Three dwell sites along a line.
        let full = MixtureDensity::new(
            vec![0.4, 0.3, 0.3],
            vec![unit_blob(0.0, 0.0), unit_blob(6.0, 0.0), unit_blob(12.0, 0.0)],
        )
        .unwrap();
        // Visits only the first two of those sites.
        let subset = MixtureDensity::new(
            vec![0.6, 0.4],
            vec![unit_blob(0.0, 0.0), unit_blob(6.0, 0.0)],
        )
        .unwrap();
        // The full route, nudged a third of a unit east.
        let similar = MixtureDensity::new(
            vec![0.4, 0.3, 0.3],
            vec![unit_blob(0.3, 0.0), unit_blob(6.3, 0.0), unit_blob(12.3, 0.0)],
        )
        .unwrap();
        // A different part of town entirely.
        let elsewhere = MixtureDensity::new(
            vec![0.5, 0.5],
            vec![unit_blob(40.0, 40.0), unit_blob(50.0, 50.0)],
        )
        .unwrap();
        // One diffuse cloud over everything.
        let diffuse = MixtureDensity::single(
            GaussianComponent::from_covariance(Vec2::new(6.0, 0.0), Mat2::scaled_identity(225.0))
                .unwrap(),
        );

        let mc = McConfig::new(10_000, 0xD1CE).unwrap();
        let sim = kl_pair(&full, &similar, &mc).unwrap();
        assert!(sim.max() < 5.0, "similar pair max {}", sim.max());
        let sub = kl_pair(&full, &subset, &mc).unwrap();
        assert!(sub.min() < 5.0, "subset pair min {}", sub.min());
        assert!(sub.max() < 10.0, "subset pair max {}", sub.max());
        let dis = kl_pair(&full, &elsewhere, &mc).unwrap();
        assert!(dis.max() > 100.0, "disjoint pair max {}", dis.max());
        let dif = kl_pair(&full, &diffuse, &mc).unwrap();
        assert!(dif.max() > 100.0, "diffuse pair max {}", dif.max());

        let mut catalog = DensityCatalog::new();
        let days = [
            (date(2024, 6, 1), full),
            (date(2024, 6, 2), subset),
            (date(2024, 6, 3), similar),
            (date(2024, 6, 4), elsewhere),
            (date(2024, 6, 5), diffuse),
        ];
        for (day, density) in days {
            catalog.insert(day, density).unwrap();
        }
        let set = discover(&catalog, &Thresholds::new(5.0, 100.0).unwrap(), &mc).unwrap();
        assert_eq!(set.len(), 3, "expected three patterns");
        let labels = set.labels();
        assert_eq!(labels[&date(2024, 6, 1)], labels[&date(2024, 6, 2)]);
        assert_eq!(labels[&date(2024, 6, 1)], labels[&date(2024, 6, 3)]);
        assert_ne!(labels[&date(2024, 6, 1)], labels[&date(2024, 6, 4)]);
        assert_ne!(labels[&date(2024, 6, 1)], labels[&date(2024, 6, 5)]);
        assert_ne!(labels[&date(2024, 6, 4)], labels[&date(2024, 6, 5)]);
    });
}

// ---------------------------------------------------------------------------
// Shared synthetic-route setup for the recovery criteria.

fn four_routes(spread: f64) -> Vec<RouteTemplate> {
    vec![
        route("low", spread, 0.5, &[(0.0, 0.0, 0.5), (8.0, 4.0, 0.5)]),
        route("east", spread, 0.5, &[(40.0, 0.0, 0.4), (48.0, 6.0, 0.3), (44.0, -6.0, 0.3)]),
        route("north", spread, 0.5, &[(0.0, 45.0, 0.5), (10.0, 45.0, 0.5)]),
        route("far", spread, 0.5, &[(-40.0, -30.0, 0.4), (-30.0, -38.0, 0.3), (-42.0, -42.0, 0.3)]),
    ]
}

fn fit_all_days(dataset: &UserDataset, fit_seed: u64) -> DensityCatalog {
    let fitted: Vec<(NaiveDate, MixtureDensity)> = dataset
        .days()
        .par_iter()
        .map(|day| {
            let prior = DpPrior::from_data(day.points(), 1.0).expect("enough points");
            let cfg = TruncationConfig::new(
                16,
                1e-5,
                500,
                mix_seed(fit_seed, day_salt(day.day_id())),
            )
            .expect("valid settings");
            let mixture = fit_variational(day.points(), &prior, &cfg)
                .and_then(|post| post.extract_mixture(0.01))
                .expect("day fits");
            (day.day_id(), mixture)
        })
        .collect();
    let mut catalog = DensityCatalog::new();
    for (day, mixture) in fitted {
        catalog.insert(day, mixture).expect("day ids are unique");
    }
    catalog
}

// ---------------------------------------------------------------------------
// 7. Four route templates over 100 days are rediscovered as four patterns
//    with a Rand index of at least 0.9, across five seeds.

#[test]
fn criterion_07_route_templates_are_rediscovered() {
    report(7, "route templates are rediscovered", || {
        for trial in 0..5u64 {
            let gen = GeneratorConfig {
                user_id: "routes".into(),
                start_day: date(2023, 9, 1),
                templates: four_routes(0.8),
                days_per_template: 25,
                points_per_day: (100, 180),
                block_len: 1,
                transition_fraction: 0.12,
                noise_scale: 0.0,
                seed: 900 + trial,
            };
            let (dataset, truth) = generate(&gen).expect("generator settings are valid");
            assert_eq!(dataset.n_days(), 100);
            let catalog = fit_all_days(&dataset, mix_seed(0xC7A0, trial));
            let mc = McConfig::new(5_000, mix_seed(0xD15C, trial)).unwrap();
            let set = discover(&catalog, &Thresholds::new(5.0, 100.0).unwrap(), &mc)
                .expect("discovery succeeds");
            let score = score_recovery(&set, &truth).expect("both groupings share days");
            assert_eq!(set.len(), 4, "trial {trial}: found {} patterns", set.len());
            assert!(
                score.rand_index >= 0.9,
                "trial {trial}: Rand index {}",
                score.rand_index
            );
        }
    });
}

// ---------------------------------------------------------------------------
// 8. Pattern count versus observation span: non-decreasing, saturating at
//    the true template count once the window covers the whole catalog.

#[test]
fn criterion_08_pattern_count_saturates_with_span() {
    report(8, "pattern count saturates with the observation span", || {
        let gen = GeneratorConfig {
            user_id: "span".into(),
            start_day: date(2023, 1, 2),
            templates: four_routes(0.8),
            days_per_template: 25,
            points_per_day: (100, 180),
            block_len: 7,
            transition_fraction: 0.12,
            noise_scale: 0.0,
            seed: 801,
        };
        let (dataset, _) = generate(&gen).expect("generator settings are valid");
        let catalog = fit_all_days(&dataset, 0xC8A0);
        let mc = McConfig::new(3_000, 0xF161).unwrap();
        let th = Thresholds::new(5.0, 100.0).unwrap();
        let curve = varying_length_experiment(&catalog, &th, &mc, &[10, 25, 50, 75, 100], 5, 0x5A71)
            .expect("experiment succeeds");
        assert_eq!(curve.len(), 5);
        for pair in curve.windows(2) {
            assert!(
                pair[1].mean_patterns >= pair[0].mean_patterns - 1e-9,
                "mean dropped between lengths {} and {}: {} -> {}",
                pair[0].length,
                pair[1].length,
                pair[0].mean_patterns,
                pair[1].mean_patterns
            );
        }
        let last = curve.last().unwrap();
        assert_eq!(last.length, 100);
        assert_eq!(
            last.mean_patterns, 4.0,
            "full span found {} patterns on average",
            last.mean_patterns
        );
    });
}

// ---------------------------------------------------------------------------
// 9. Bulk invariants: EM never decreases its objective; stick lengths always
//    normalize. One thousand randomized cases each.

#[test]
fn criterion_09_em_and_stick_invariants_hold_in_bulk() {
    report(9, "optimizer and stick invariants hold in bulk", || {
        (0..1000u64).into_par_iter().for_each(|case| {
            let mut rng = rng_from_seed(mix_seed(0x9E11, case));
            let n = rng.random_range(30..=120);
            let points: Vec<Vec2> = (0..n)
                .map(|_| {
                    Vec2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0))
                })
                .collect();
            let k = rng.random_range(1..=4);
            let fit = fit_em(&points, k, mix_seed(0x9E12, case), 1e-7, 150)
                .expect("fit succeeds");
            for (i, w) in fit.log_likelihood_trace.windows(2).enumerate() {
                assert!(
                    w[1] >= w[0] - 1e-8,
                    "case {case}: objective dropped {} -> {} at step {i}",
                    w[0],
                    w[1]
                );
            }
        });

        for case in 0..1000u64 {
            let mut rng = rng_from_seed(mix_seed(0x571C, case));
            let len = rng.random_range(1..=12);
            let sticks: Vec<f64> = (0..len).map(|_| rng.random_range(1e-6..0.999_999)).collect();
            let weights = stick_lengths_to_weights(&sticks).expect("sticks are in range");
            assert_eq!(weights.len(), len + 1);
            let total: f64 = weights.iter().sum();
            assert!((total - 1.0).abs() <= 1e-12, "case {case}: sum {total}");
            assert!(
                weights.iter().all(|&w| (0.0..=1.0).contains(&w)),
                "case {case}: weight out of range"
            );
        }
    });
}

// ---------------------------------------------------------------------------
// 10. The full generate -> fit -> discover pipeline is byte-reproducible,
//     including across different worker counts.

#[test]
fn criterion_10_pipeline_artifacts_are_byte_identical() {
    report(10, "pipeline artifacts are byte-identical", || {
        let dir = tempfile::tempdir().unwrap();
        let config_for = |out_dir: &str, workers: u64| {
            serde_json::json!({
                "seed": 99,
                "output_dir": out_dir,
                "mc_samples": 3000,
                "workers": workers,
                "synth": {
                    "user_id": "repro",
                    "start_day": "2024-05-06",
                    "templates": four_routes(0.8),
                    "days_per_template": 5,
                    "points_per_day": [60, 120],
                    "block_len": 1,
                    "transition_fraction": 0.12,
                    "noise_scale": 0.0,
                    "seed": 7
                }
            })
        };
        write_config(dir.path(), "run_a.json", &config_for("run_a", 1));
        write_config(dir.path(), "run_b.json", &config_for("run_b", 4));
        for cfg in ["run_a.json", "run_b.json"] {
            run_ok(&["synth", "--config", cfg], dir.path());
            run_ok(&["fit", "--config", cfg], dir.path());
            run_ok(&["discover", "--config", cfg], dir.path());
        }
        for name in [
            "synthetic.csv",
            "truth.json",
            "dataset.json",
            "catalog.json",
            "patterns.json",
            "summary.csv",
            "ecdf.csv",
        ] {
            let a = std::fs::read(dir.path().join("run_a").join(name)).expect(name);
            let b = std::fs::read(dir.path().join("run_b").join(name)).expect(name);
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    });
}
