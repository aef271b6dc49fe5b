//! The pipeline stages behind each subcommand. A stage reads its inputs
//! (the raw CSV or cached artifacts in the output directory), runs the
//! per-day or per-pair work on a bounded pool, and writes every artifact
//! from the calling thread. Work units carry seeds derived from the config
//! seed and their own identity, so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use mobility_core::discovery::{discover_with_rule, summarize, DensityCatalog, PatternSet};
use mobility_core::dpmm::{fit_variational, DpPrior, TruncationConfig};
use mobility_core::gmm::fit_em;
use mobility_core::kl::kl_pair;
use mobility_core::linalg::Vec2;
use mobility_core::seeding::{day_salt, mix_seed};
use mobility_core::synth::{generate, score_recovery};
use mobility_core::trajectory::{
    parse_records, segment_by_day, write_csv as write_dataset_csv, DailyTrajectory, UserDataset,
};
use rayon::prelude::*;

use crate::artifacts::{
    fmt_float, read_json, write_json, write_text, CatalogArtifact, DayFit, EmSummary, ModelSpec,
    PatternEntry, PatternsArtifact, PosteriorGlobals, SkippedEntry,
};
use crate::config::PipelineConfig;

/// Salt for the held-out split stream (distinct from the fit stream).
const HOLDOUT_SALT: u64 = 0x484f_4c44_4f55_5400;
/// Salt for the window-position stream of the length experiment.
const CURVE_SALT: u64 = 0x4355_5256_4500_0000;

fn worker_pool(cfg: &PipelineConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("building the worker pool")
}

fn load_dataset(cfg: &PipelineConfig) -> Result<UserDataset> {
    read_json(&cfg.artifact("dataset.json"))
}

fn load_catalog(cfg: &PipelineConfig) -> Result<CatalogArtifact> {
    read_json(&cfg.artifact("catalog.json"))
}

pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<()> {
    let input = cfg
        .input
        .as_ref()
        .context("ingest needs a GPS CSV: set \"input\" in the config or pass --input")?;
    let file =
        File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let (records, rejected) = parse_records(BufReader::new(file))?;
    let dataset = segment_by_day(&records, &cfg.projection)?;
    let out = cfg.artifact("dataset.json");
    write_json(&out, &dataset)?;
    for day in dataset.days() {
        println!("{} {}", day.day_id(), day.point_count());
    }
    println!(
        "ingested {} days for user {:?} ({} malformed rows rejected) -> {}",
        dataset.n_days(),
        dataset.user_id(),
        rejected,
        out.display()
    );
    Ok(())
}

fn fit_one_day(
    cfg: &PipelineConfig,
    day: &DailyTrajectory,
    day_seed: u64,
    gmm_k: Option<usize>,
) -> Result<DayFit> {
    match gmm_k {
        None => {
            let prior = DpPrior::from_data(day.points(), cfg.concentration)?;
            let trunc =
                TruncationConfig::new(cfg.truncation, cfg.vi_tol, cfg.vi_max_iter, day_seed)?;
            let post = fit_variational(day.points(), &prior, &trunc)?;
            let mixture = post.extract_mixture(cfg.weight_floor)?;
            let (stick_a, stick_b) = post.sticks();
            Ok(DayFit {
                mixture,
                posterior: Some(PosteriorGlobals {
                    stick_a: stick_a.to_vec(),
                    stick_b: stick_b.to_vec(),
                    means: post.component_means().to_vec(),
                    mean_scales: post.mean_scales().to_vec(),
                    scales: post.scale_matrices().to_vec(),
                    dofs: post.degrees_of_freedom().to_vec(),
                    elbo: post.final_elbo(),
                    iterations: post.iterations(),
                }),
                em: None,
            })
        }
        Some(k) => {
            let fit = fit_em(day.points(), k, day_seed, cfg.em_tol, cfg.em_max_iter)?;
            let mean_log_likelihood = *fit
                .log_likelihood_trace
                .last()
                .expect("trace has at least one entry");
            Ok(DayFit {
                mixture: fit.mixture,
                posterior: None,
                em: Some(EmSummary { mean_log_likelihood, iterations: fit.iterations }),
            })
        }
    }
}

/// Fit every fittable day in parallel. Failed fits become skipped entries
/// rather than aborting the run; their reasons land in the artifact.
pub fn fit_catalog(
    cfg: &PipelineConfig,
    dataset: &UserDataset,
    gmm_k: Option<usize>,
) -> Result<CatalogArtifact> {
    let seed = cfg.seed()?;
    let model = match gmm_k {
        None => ModelSpec::Dp {
            concentration: cfg.concentration,
            truncation: cfg.truncation,
            tol: cfg.vi_tol,
            max_iter: cfg.vi_max_iter,
            weight_floor: cfg.weight_floor,
        },
        Some(k) => ModelSpec::Em { k, tol: cfg.em_tol, max_iter: cfg.em_max_iter },
    };

    let mut skipped = Vec::new();
    let mut fittable = Vec::new();
    for day in dataset.days() {
        if day.fittable(cfg.min_points) {
            fittable.push(day);
        } else {
            skipped.push(SkippedEntry {
                day_id: day.day_id(),
                reason: format!(
                    "{} points, need at least {}",
                    day.point_count(),
                    cfg.min_points
                ),
            });
        }
    }

    let pool = worker_pool(cfg)?;
    let results: Vec<(NaiveDate, std::result::Result<DayFit, String>)> = pool.install(|| {
        fittable
            .par_iter()
            .map(|day| {
                let day_seed = mix_seed(seed, day_salt(day.day_id()));
                let fit = fit_one_day(cfg, day, day_seed, gmm_k).map_err(|e| format!("{e:#}"));
                (day.day_id(), fit)
            })
            .collect()
    });

    let mut days = BTreeMap::new();
    for (day_id, outcome) in results {
        match outcome {
            Ok(fit) => {
                days.insert(day_id, fit);
            }
            Err(reason) => skipped.push(SkippedEntry { day_id, reason }),
        }
    }
    skipped.sort_by_key(|s| s.day_id);

    Ok(CatalogArtifact {
        user_id: dataset.user_id().to_string(),
        min_points: cfg.min_points,
        model,
        seed,
        days,
        skipped,
    })
}

pub fn cmd_fit(cfg: &PipelineConfig, gmm_k: Option<usize>) -> Result<()> {
    cfg.seed()?;
    let dataset = load_dataset(cfg)?;
    let catalog = fit_catalog(cfg, &dataset, gmm_k)?;
    let out = cfg.artifact("catalog.json");
    write_json(&out, &catalog)?;
    let components: usize = catalog.days.values().map(|d| d.mixture.n_components()).sum();
    println!(
        "fitted {} days ({} skipped), {} mixture components in total -> {}",
        catalog.days.len(),
        catalog.skipped.len(),
        components,
        out.display()
    );
    for s in &catalog.skipped {
        println!("skipped {}: {}", s.day_id, s.reason);
    }
    Ok(())
}

pub fn cmd_divergence(cfg: &PipelineConfig) -> Result<()> {
    let mc = cfg.mc()?;
    let catalog = load_catalog(cfg)?;
    let days: Vec<(&NaiveDate, &DayFit)> = catalog.days.iter().collect();
    if days.len() < 2 {
        bail!("divergence needs at least two fitted days, catalog has {}", days.len());
    }
    let mut pairs = Vec::new();
    for i in 0..days.len() {
        for j in i + 1..days.len() {
            pairs.push((i, j));
        }
    }

    let pool = worker_pool(cfg)?;
    let rows: Vec<std::result::Result<String, String>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, fit_a) = days[i];
                let (b, fit_b) = days[j];
                let pair_seed = mix_seed(mc.seed(), mix_seed(day_salt(*a), day_salt(*b)));
                kl_pair(&fit_a.mixture, &fit_b.mixture, &mc.with_seed(pair_seed))
                    .map(|pair| {
                        format!(
                            "{},{},{},{},{},{}",
                            a,
                            b,
                            fmt_float(pair.forward.value),
                            fmt_float(pair.reverse.value),
                            fmt_float(pair.forward.std_error),
                            fmt_float(pair.reverse.std_error)
                        )
                    })
                    .map_err(|e| format!("pair {a}/{b}: {e}"))
            })
            .collect()
    });

    let mut text = String::from("day_id_p,day_id_q,forward,reverse,std_error_fwd,std_error_rev\n");
    for row in rows {
        text.push_str(&row.map_err(|e| anyhow!(e))?);
        text.push('\n');
    }
    let out = cfg.artifact("divergence.csv");
    write_text(&out, &text)?;
    println!(
        "estimated {} day pairs over {} days -> {}",
        pairs.len(),
        days.len(),
        out.display()
    );
    Ok(())
}

/// Run discovery over a cached catalog. Never refits anything.
pub fn discover_from_catalog(
    cfg: &PipelineConfig,
    catalog: &CatalogArtifact,
) -> Result<(PatternSet, PatternsArtifact)> {
    let mc = cfg.mc()?;
    let th = cfg.thresholds()?;
    let mut densities = DensityCatalog::new();
    for (day, fit) in &catalog.days {
        densities.insert(*day, fit.mixture.clone())?;
    }
    let set = discover_with_rule(&densities, &th, &mc, cfg.swap_rule)?;
    let patterns = set
        .patterns()
        .iter()
        .enumerate()
        .map(|(id, p)| PatternEntry {
            id,
            representative_day: p.representative_day,
            members: p.members.clone(),
        })
        .collect();
    let artifact = PatternsArtifact {
        thresholds: th,
        mc_samples: mc.n(),
        seed: mc.seed(),
        swap_rule: cfg.swap_rule,
        patterns,
    };
    Ok((set, artifact))
}

fn write_discovery_outputs(
    cfg: &PipelineConfig,
    set: &PatternSet,
    artifact: &PatternsArtifact,
) -> Result<()> {
    write_json(&cfg.artifact("patterns.json"), artifact)?;

    let mut summary_text = String::from("pattern_id,representative_day,member_count\n");
    for p in &artifact.patterns {
        summary_text.push_str(&format!(
            "{},{},{}\n",
            p.id,
            p.representative_day,
            p.members.len()
        ));
    }
    write_text(&cfg.artifact("summary.csv"), &summary_text)?;

    let summary = summarize(set);
    let mut ecdf_text = String::from("size,fraction\n");
    for pt in &summary.ecdf {
        ecdf_text.push_str(&format!("{},{}\n", pt.size, fmt_float(pt.fraction)));
    }
    write_text(&cfg.artifact("ecdf.csv"), &ecdf_text)?;

    println!(
        "discovered {} patterns (sizes {:?}, singleton fraction {:?}) -> {}",
        set.len(),
        summary.member_counts,
        summary.singleton_fraction,
        cfg.artifact("patterns.json").display()
    );
    Ok(())
}

pub fn cmd_discover(cfg: &PipelineConfig) -> Result<()> {
    cfg.seed()?;
    let catalog = load_catalog(cfg)?;
    let (set, artifact) = discover_from_catalog(cfg, &catalog)?;
    write_discovery_outputs(cfg, &set, &artifact)
}

fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

struct DaySplit {
    date: NaiveDate,
    train: Vec<Vec2>,
    test: Vec<Vec2>,
}

pub fn cmd_compare_models(cfg: &PipelineConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let dataset = load_dataset(cfg)?;

    let mut splits = Vec::new();
    let mut unusable = 0usize;
    for day in dataset.days() {
        if !day.fittable(cfg.min_points) {
            unusable += 1;
            continue;
        }
        let split_seed = mix_seed(mix_seed(seed, day_salt(day.day_id())), HOLDOUT_SALT);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &p) in day.points().iter().enumerate() {
            if unit_from_hash(mix_seed(split_seed, i as u64)) < cfg.holdout_fraction {
                test.push(p);
            } else {
                train.push(p);
            }
        }
        if test.is_empty() || train.len() < cfg.min_points {
            unusable += 1;
            continue;
        }
        splits.push(DaySplit { date: day.day_id(), train, test });
    }
    if splits.is_empty() {
        bail!("no day offers enough points for a held-out split");
    }

    let model_names: Vec<String> = cfg
        .em_ks
        .iter()
        .map(|k| format!("em-{k}"))
        .chain(std::iter::once("dp".to_string()))
        .collect();

    // Per day and model: summed held-out log-likelihood and point count.
    let pool = worker_pool(cfg)?;
    let per_day: Vec<std::result::Result<Vec<(f64, usize)>, String>> = pool.install(|| {
        splits
            .par_iter()
            .map(|split| {
                let day_seed = mix_seed(seed, day_salt(split.date));
                let n_test = split.test.len();
                let mut cells = Vec::with_capacity(cfg.em_ks.len() + 1);
                for &k in &cfg.em_ks {
                    let fit = fit_em(
                        &split.train,
                        k,
                        mix_seed(day_seed, k as u64),
                        cfg.em_tol,
                        cfg.em_max_iter,
                    )
                    .map_err(|e| format!("{}: em-{k}: {e}", split.date))?;
                    let ll = fit
                        .mixture
                        .mean_log_likelihood(&split.test)
                        .map_err(|e| format!("{}: em-{k}: {e}", split.date))?;
                    cells.push((ll * n_test as f64, n_test));
                }
                let dp = (|| -> mobility_core::Result<f64> {
                    let prior = DpPrior::from_data(&split.train, cfg.concentration)?;
                    let trunc = TruncationConfig::new(
                        cfg.truncation,
                        cfg.vi_tol,
                        cfg.vi_max_iter,
                        day_seed,
                    )?;
                    let post = fit_variational(&split.train, &prior, &trunc)?;
                    post.extract_mixture(cfg.weight_floor)?.mean_log_likelihood(&split.test)
                })()
                .map_err(|e| format!("{}: dp: {e}", split.date))?;
                cells.push((dp * n_test as f64, n_test));
                Ok(cells)
            })
            .collect()
    });

    let mut totals = vec![(0.0f64, 0usize); model_names.len()];
    for day_cells in per_day {
        let cells = day_cells.map_err(|e| anyhow!(e))?;
        for (slot, (ll_sum, n)) in totals.iter_mut().zip(cells) {
            slot.0 += ll_sum;
            slot.1 += n;
        }
    }

    let mut text = String::from("model,mean_log_likelihood,days,heldout_points\n");
    for (name, (ll_sum, n)) in model_names.iter().zip(&totals) {
        let mean = ll_sum / *n as f64;
        text.push_str(&format!("{},{},{},{}\n", name, fmt_float(mean), splits.len(), n));
        println!("{name} {mean:?}");
    }
    let out = cfg.artifact("compare-models.csv");
    write_text(&out, &text)?;
    println!(
        "compared {} models on {} days ({} unusable) -> {}",
        model_names.len(),
        splits.len(),
        unusable,
        out.display()
    );
    Ok(())
}

pub fn cmd_curve(cfg: &PipelineConfig) -> Result<()> {
    let mc = cfg.mc()?;
    let th = cfg.thresholds()?;
    let catalog = load_catalog(cfg)?;
    let mut densities = DensityCatalog::new();
    for (day, fit) in &catalog.days {
        densities.insert(*day, fit.mixture.clone())?;
    }
    let points = mobility_core::discovery::varying_length_experiment(
        &densities,
        &th,
        &mc,
        &cfg.curve_lengths,
        cfg.curve_repeats,
        mix_seed(cfg.seed()?, CURVE_SALT),
    )?;
    let mut text = String::from("length,mean_patterns,std_patterns\n");
    for p in &points {
        text.push_str(&format!(
            "{},{},{}\n",
            p.length,
            fmt_float(p.mean_patterns),
            fmt_float(p.std_patterns)
        ));
        println!("length {}: mean {:?} patterns (sd {:?})", p.length, p.mean_patterns, p.std_patterns);
    }
    let out = cfg.artifact("curve.csv");
    write_text(&out, &text)?;
    println!(
        "measured {} window lengths x {} repeats -> {}",
        cfg.curve_lengths.len(),
        cfg.curve_repeats,
        out.display()
    );
    Ok(())
}

pub fn cmd_synth(cfg: &PipelineConfig, run_pipeline: bool) -> Result<()> {
    if run_pipeline {
        cfg.seed()?;
    }
    let gen = cfg
        .synth
        .as_ref()
        .context("synth needs a \"synth\" section in the config")?;
    let (dataset, truth) = generate(gen)?;

    let mut csv_buf = Vec::new();
    write_dataset_csv(&dataset, &mut csv_buf)?;
    write_text(
        &cfg.artifact("synthetic.csv"),
        std::str::from_utf8(&csv_buf).expect("CSV output is UTF-8"),
    )?;
    write_json(&cfg.artifact("truth.json"), &truth)?;
    write_json(&cfg.artifact("dataset.json"), &dataset)?;
    println!(
        "generated {} days from {} templates -> {}",
        dataset.n_days(),
        gen.templates.len(),
        cfg.artifact("synthetic.csv").display()
    );

    if run_pipeline {
        let catalog = fit_catalog(cfg, &dataset, None)?;
        write_json(&cfg.artifact("catalog.json"), &catalog)?;
        let (set, artifact) = discover_from_catalog(cfg, &catalog)?;
        write_discovery_outputs(cfg, &set, &artifact)?;
        let score = score_recovery(&set, &truth)?;
        write_json(&cfg.artifact("recovery.json"), &score)?;
        println!(
            "matched {} discovered patterns against {} true templates on {} days",
            score.found_patterns, score.true_patterns, score.days_scored
        );
        println!("recovery Rand index {:?}", score.rand_index);
    }
    Ok(())
}
