//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use chrono::{Datelike, Duration, NaiveDate};
use coldpack::behavior::is_clustering_eligible;
use coldpack::domain::{validate_dataset, Booking, Catalog, CourseId, Dataset, UserId};
use coldpack::evalharness::{evaluate, run_experiment, tune_model, ExperimentConfig, ExperimentReport, Tuned};
use coldpack::io::{load_dataset, write_csv, write_dataset, write_json};
use coldpack::optionsim::weights_table;
use coldpack::pricesim::{fit_price_model, PriceExpansion};
use coldpack::ranker::{HillClimbResult, Setting, TrainedRecommender};
use coldpack::reference::{course_scores, select_reference};
use coldpack::synthgen::{generate_dataset, lifespan_fraction_within, spend_adherence, Generated};
use coldpack::{report, store};
use log::{info, warn};
use serde::Serialize;

use crate::args::*;
use crate::config::{Overrides, RunConfig};
use crate::manifest::{ModelManifest, ValidationManifest, VAL_MANIFEST};
use crate::UsageError;

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(level) = cli.log_level {
        cfg.log_level = level;
    }
    init_logging(&cfg.log_level)?;
    match cli.command {
        Command::Gen(a) => gen(cfg, a),
        Command::Profile(a) => profile(cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Tune(a) => tune(cfg, a),
        Command::Recommend(a) => recommend(cfg, a),
        Command::Eval(a) => eval(cfg, a),
        Command::PriceReport(a) => price_report(cfg, a),
        Command::ExplainRef(a) => explain_ref(cfg, a),
        Command::Pipeline(a) => pipeline(cfg, a),
    }
}

fn init_logging(level: &str) -> Result<()> {
    let filter: log::LevelFilter = level
        .parse()
        .map_err(|_| UsageError::Config(format!("log_level: unknown level {level:?}")))?;
    // A second init (tests driving several commands) is harmless.
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

fn require(flag: Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| file.clone())
        .ok_or_else(|| UsageError::Config(format!("{name}: required (flag or config file)")).into())
}

fn parse_settings(s: &str) -> Result<Vec<Setting>> {
    Setting::parse_list(s).map_err(|e| UsageError::Config(e.to_string()).into())
}

fn hyper_overrides(h: &HyperArgs) -> Overrides {
    Overrides {
        seed: h.seed,
        k: h.k,
        top_m: h.top_m,
        omega: h.omega,
        lambda: h.lambda,
        step: h.step,
        tune_n: h.tune_n,
        ..Overrides::default()
    }
}

fn window_overrides(o: &mut Overrides, w: &WindowArgs) -> Result<()> {
    o.cutoff = w.cutoff;
    o.horizon = w.horizon;
    o.n_max = w.n_max;
    if let Some(s) = &w.settings {
        o.settings = Some(parse_settings(s)?);
    }
    Ok(())
}

fn apply_shape(cfg: &mut RunConfig, s: &GenShape) -> Result<()> {
    if let Some(n) = s.users {
        cfg.generator.n_users = n;
    }
    if let Some(n) = s.courses {
        cfg.generator.n_courses = n;
    }
    if let Some(n) = s.months {
        cfg.generator.months = n;
    }
    if let Some(mix) = &s.cluster_mix {
        cfg.generator.cluster_mix = mix
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| UsageError::Config(format!("cluster_mix: {e}")))?;
    }
    Ok(())
}

/// Loads a dataset and rejects it when any validation rule fails.
fn load_validated(path: &Path) -> Result<Dataset> {
    let d = load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?;
    let violations = validate_dataset(&d);
    if !violations.is_empty() {
        let mut msg = format!("{} violation(s) in {}", violations.len(), path.display());
        for v in violations.iter().take(20) {
            msg.push_str(&format!("\n  {v}"));
        }
        return Err(UsageError::Validation(msg).into());
    }
    Ok(d)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// JSON to `out` (with a config snapshot beside it) or to stdout.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>, cfg: &RunConfig) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => {
            write_text(path, &text)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
            write_text(&path.with_file_name(format!("{stem}.config.toml")), &cfg.to_toml()?)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct LabelRow<'a> {
    user_id: u32,
    archetype: usize,
    archetype_name: &'a str,
}

fn write_generated(g: &Generated, cfg: &RunConfig, out: &Path) -> Result<()> {
    write_dataset(out, &g.dataset)?;
    write_json(&out.join("ground_truth.json"), &g.ground_truth)?;
    let names = &cfg.generator.archetypes;
    write_csv(
        &out.join("labels.csv"),
        g.labels.iter().map(|(u, &a)| LabelRow {
            user_id: u.0,
            archetype: a,
            archetype_name: names.get(a).map_or("", |x| x.name.as_str()),
        }),
    )?;
    cfg.write_snapshot(out)
}

fn gen(mut cfg: RunConfig, a: GenArgs) -> Result<()> {
    cfg.apply(&Overrides {
        seed: a.seed,
        ..Overrides::default()
    });
    apply_shape(&mut cfg, &a.shape)?;
    cfg.validate()?;
    let out = require(a.out, &cfg.out, "out")?;
    let g = generate_dataset(&cfg.generator)?;
    write_generated(&g, &cfg, &out)?;
    info!(
        "generated {} users, {} courses, {} packages, {} bookings into {}",
        g.labels.len(),
        g.dataset.courses.len(),
        g.dataset.packages.len(),
        g.dataset.bookings.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Profile {
    courses: usize,
    packages: usize,
    bookings: usize,
    users: usize,
    holidays: usize,
    first_booking: Option<NaiveDate>,
    last_booking: Option<NaiveDate>,
    mean_bookings_per_user: f64,
    clustering_eligible_users: usize,
    lifespan_within_31_days: f64,
    spend_within_30_percent: f64,
    mean_package_price: f64,
    mean_price_paid: f64,
    bookings_per_month: BTreeMap<String, usize>,
    violations: usize,
    first_violations: Vec<String>,
}

fn profile(cfg: RunConfig, a: ProfileArgs) -> Result<()> {
    let data = require(a.data, &cfg.data, "data")?;
    let d = load_dataset(&data).with_context(|| format!("loading dataset {}", data.display()))?;
    let histories = d.histories();
    let violations = validate_dataset(&d);
    let mean = |xs: &mut dyn Iterator<Item = f64>| {
        let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    };
    let mut per_month = BTreeMap::new();
    for b in &d.bookings {
        *per_month.entry(b.booked_at.format("%Y-%m").to_string()).or_insert(0) += 1;
    }
    let span = d.date_span();
    let p = Profile {
        courses: d.courses.len(),
        packages: d.packages.len(),
        bookings: d.bookings.len(),
        users: histories.len(),
        holidays: d.holiday_calendar.len(),
        first_booking: span.map(|s| s.0),
        last_booking: span.map(|s| s.1),
        mean_bookings_per_user: d.bookings.len() as f64 / histories.len().max(1) as f64,
        clustering_eligible_users: histories.values().filter(|h| is_clustering_eligible(h)).count(),
        lifespan_within_31_days: lifespan_fraction_within(&d, 31),
        spend_within_30_percent: spend_adherence(&d, 0.30),
        mean_package_price: mean(&mut d.packages.iter().map(|p| p.price as f64)),
        mean_price_paid: mean(&mut d.bookings.iter().map(|b| b.price_paid as f64)),
        bookings_per_month: per_month,
        violations: violations.len(),
        first_violations: violations.iter().take(20).map(ToString::to_string).collect(),
    };
    emit_json(&p, a.out.as_deref(), &cfg)
}

fn training_side(d: &Dataset, as_of: NaiveDate) -> Result<Vec<Booking>> {
    let train: Vec<Booking> = d.bookings.iter().filter(|b| b.booked_at <= as_of).cloned().collect();
    if train.is_empty() {
        return Err(UsageError::Validation(format!("no bookings on or before {as_of}")).into());
    }
    Ok(train)
}

/// Fits on bookings up to `as_of` and writes the model directory.
fn train_into(
    d: &Dataset,
    data: &Path,
    as_of: NaiveDate,
    cfg: &RunConfig,
    dir: &Path,
) -> Result<TrainedRecommender> {
    let train = training_side(d, as_of)?;
    let catalog = Catalog::from_dataset(d);
    let started = Instant::now();
    let model = TrainedRecommender::fit(&train, &catalog, as_of, &cfg.model)?;
    let artifacts = store::save_model(&model, dir)?;
    ModelManifest::new(data, as_of, train.len(), &artifacts, cfg).write(dir)?;
    write_csv(&dir.join("option_weights.csv"), weights_table(&model.option_models))?;
    write_json(
        &dir.join(VAL_MANIFEST),
        &ValidationManifest {
            data: data.to_path_buf(),
            cutoff: as_of,
            horizon: cfg.eval.horizon,
        },
    )?;
    cfg.write_snapshot(dir)?;
    info!(
        "trained on {} bookings up to {as_of} in {} ms; {} clusters; model in {}",
        train.len(),
        started.elapsed().as_millis(),
        model.segmentation.clustering.k,
        dir.display()
    );
    Ok(model)
}

fn train(mut cfg: RunConfig, a: TrainArgs) -> Result<()> {
    cfg.apply(&hyper_overrides(&a.hyper));
    cfg.validate()?;
    let data = require(a.data, &cfg.data, "data")?;
    let dir = require(a.model, &cfg.model_dir, "model")?;
    let as_of = a.as_of.unwrap_or(cfg.eval.cutoff);
    let d = load_validated(&data)?;
    train_into(&d, &data, as_of, &cfg, &dir)?;
    Ok(())
}

#[derive(Serialize)]
struct TuningRecord<'a> {
    window: (NaiveDate, NaiveDate),
    n: usize,
    validation_users: usize,
    results: &'a BTreeMap<Setting, HillClimbResult>,
}

/// Tunes `model` on the window after its training date, stores the weights
/// in `dir` and returns them.
fn tune_into(
    model: &mut TrainedRecommender,
    d: &Dataset,
    horizon: i64,
    settings: &[Setting],
    cfg: &RunConfig,
    dir: &Path,
) -> Result<Tuned> {
    let catalog = Catalog::from_dataset(d);
    let started = Instant::now();
    let (results, validation_users) = tune_model(model, &d.bookings, horizon, &catalog, settings, &cfg.tuning)?;
    for (s, r) in &results {
        model.weights.insert(*s, r.weights);
        info!(
            "{s}: EMP@{} {:.4} -> {:.4} at {:?} ({} rounds)",
            cfg.tuning.n,
            r.start_emp,
            r.emp,
            r.weights.to_array(),
            r.trajectory.len() - 1
        );
    }
    store::save_weights(&model.weights, dir)?;
    write_json(
        &dir.join("tuning.json"),
        &TuningRecord {
            window: (model.as_of + Duration::days(1), model.as_of + Duration::days(horizon)),
            n: cfg.tuning.n,
            validation_users,
            results: &results,
        },
    )?;
    info!("tuned {} setting(s) on {validation_users} users in {} ms", results.len(), started.elapsed().as_millis());
    Ok(Tuned {
        results,
        validation_users,
    })
}

fn load_model_checked(dir: &Path) -> Result<(ModelManifest, TrainedRecommender)> {
    let manifest = ModelManifest::read(dir)?;
    let bad = manifest.verify(dir)?;
    if !bad.is_empty() {
        return Err(UsageError::Validation(format!("artifact hash mismatch: {}", bad.join(", "))).into());
    }
    let model = store::load_model(dir).with_context(|| format!("loading model {}", dir.display()))?;
    Ok((manifest, model))
}

fn tune(mut cfg: RunConfig, a: TuneArgs) -> Result<()> {
    cfg.apply(&hyper_overrides(&a.hyper));
    if let Some(s) = &a.settings {
        cfg.eval.settings = parse_settings(s)?;
    }
    cfg.validate()?;
    let dir = require(a.model, &cfg.model_dir, "model")?;
    let (_, mut model) = load_model_checked(&dir)?;
    let val_path = a.val.unwrap_or_else(|| dir.join(VAL_MANIFEST));
    let val: ValidationManifest = coldpack::io::read_json(&val_path)
        .with_context(|| format!("reading validation manifest {}", val_path.display()))?;
    if val.cutoff != model.as_of {
        return Err(UsageError::Validation(format!(
            "validation split starts after {} but the model was trained up to {}",
            val.cutoff, model.as_of
        ))
        .into());
    }
    let d = load_validated(&val.data)?;
    tune_into(&mut model, &d, val.horizon, &cfg.eval.settings, &cfg, &dir)?;
    cfg.write_snapshot(&dir.join("tune"))?;
    println!("{}", serde_json::to_string_pretty(&model.weights)?);
    Ok(())
}

fn parse_window(s: &str) -> Result<(NaiveDate, NaiveDate)> {
    let bad = || UsageError::Config(format!("window: expected start:end dates, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: NaiveDate = a.trim().parse().map_err(|_| bad())?;
    let b: NaiveDate = b.trim().parse().map_err(|_| bad())?;
    if b < a {
        return Err(UsageError::Config(format!("window: end {b} precedes start {a}")).into());
    }
    Ok((a, b))
}

fn history_until(d: &Dataset, user: UserId, as_of: NaiveDate) -> Vec<Booking> {
    let mut h: Vec<Booking> = d
        .bookings
        .iter()
        .filter(|b| b.user_id == user && b.booked_at <= as_of)
        .cloned()
        .collect();
    h.sort_by_key(|b| b.booked_at);
    h
}

fn recommend(cfg: RunConfig, a: RecommendArgs) -> Result<()> {
    let dir = require(a.model, &cfg.model_dir, "model")?;
    let window = parse_window(&a.window)?;
    let setting: Setting = a.setting.parse().map_err(|e: coldpack::Error| UsageError::Config(e.to_string()))?;
    let (manifest, model) = load_model_checked(&dir)?;
    let data = a.data.or(cfg.data.clone()).unwrap_or(manifest.data);
    let d = load_validated(&data)?;
    if window.0 <= model.as_of {
        warn!("window starts on or before the training date {}", model.as_of);
    }
    let user = UserId(a.user);
    let history = history_until(&d, user, model.as_of);
    let rec = model.recommend(user, &history, window, a.n, &Catalog::from_dataset(&d), setting)?;
    if rec.fallback {
        info!("user {user} has no history up to {}; using popular courses", model.as_of);
    }
    emit_json(&rec, a.out.as_deref(), &cfg)
}

fn experiment_config(cfg: &RunConfig) -> ExperimentConfig {
    ExperimentConfig {
        cutoff: cfg.eval.cutoff,
        horizon: cfg.eval.horizon,
        settings: cfg.eval.settings.clone(),
        n_max: cfg.eval.n_max,
        model: cfg.model.clone(),
        tuning: cfg.eval.tune.then(|| cfg.tuning.clone()),
    }
}

/// emp_curves.csv, emp_curves.svg, summary.json and report.json.
pub fn write_report(r: &ExperimentReport, cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join("emp_curves.csv"), &report::emp_curves_csv(r))?;
    write_text(&out.join("emp_curves.svg"), &report::emp_curves_svg(r))?;
    write_json(&out.join("summary.json"), &report::summary(r, 5))?;
    write_json(&out.join("report.json"), r)?;
    cfg.write_snapshot(out)?;
    for s in &r.settings {
        info!(
            "{}: EMP@5 {:.4}, EMP@{} {:.4}",
            s.setting,
            s.emp.get(4).copied().unwrap_or(f64::NAN),
            r.n_max,
            s.emp.last().copied().unwrap_or(f64::NAN)
        );
    }
    info!(
        "{} users evaluated ({} cold); peak candidates {}, mean {:.1}; {} inactive recommendations",
        r.users_evaluated, r.cold_users, r.peak_candidates, r.mean_candidates, r.inactive_recommendations
    );
    Ok(())
}

fn eval(mut cfg: RunConfig, a: EvalArgs) -> Result<()> {
    let mut o = hyper_overrides(&a.hyper);
    window_overrides(&mut o, &a.window)?;
    cfg.apply(&o);
    if a.no_tune {
        cfg.eval.tune = false;
    }
    cfg.validate()?;
    let data = require(a.data, &cfg.data, "data")?;
    let out = require(a.out, &cfg.out, "out")?;
    let d = load_validated(&data)?;
    let r = run_experiment(&d, &experiment_config(&cfg))?;
    info!("experiment finished in {} ms", r.elapsed_ms);
    write_report(&r, &cfg, &out)
}

#[derive(Serialize)]
struct PriceRow {
    package_id: u32,
    actual: f64,
    predicted: f64,
    residual: f64,
}

#[derive(Serialize)]
struct PriceSummary {
    course: u32,
    packages: usize,
    expansion: PriceExpansion,
    features: usize,
    r_squared: f64,
    residual_sd: f64,
    max_abs_residual: f64,
    residual_sd_bottom_quartile: f64,
    residual_sd_top_quartile: f64,
}

fn price_report(cfg: RunConfig, a: PriceReportArgs) -> Result<()> {
    let data = require(a.data, &cfg.data, "data")?;
    let d = load_validated(&data)?;
    let catalog = Catalog::from_dataset(&d);
    let course = match a.course {
        Some(c) => CourseId(c),
        None => catalog
            .course_ids()
            .iter()
            .copied()
            .max_by_key(|&c| (catalog.course_packages(c).count(), std::cmp::Reverse(c)))
            .ok_or_else(|| UsageError::Validation("dataset has no courses".into()))?,
    };
    let pkgs: Vec<_> = catalog.course_packages(course).cloned().collect();
    if pkgs.is_empty() {
        return Err(UsageError::Validation(format!("course {course} has no packages")).into());
    }
    let fit = fit_price_model(&pkgs, PriceExpansion::for_rows(pkgs.len()))?;
    let summary = PriceSummary {
        course: course.0,
        packages: pkgs.len(),
        expansion: fit.expansion,
        features: fit.feature_names.len(),
        r_squared: fit.r_squared,
        residual_sd: fit.residual_sd,
        max_abs_residual: fit.max_abs_residual,
        residual_sd_bottom_quartile: fit.residual_sd_bottom_quartile,
        residual_sd_top_quartile: fit.residual_sd_top_quartile,
    };
    if let Some(out) = a.out.or(cfg.out.clone()) {
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        write_csv(
            &out.join("price_predictions.csv"),
            fit.predictions.iter().map(|p| PriceRow {
                package_id: p.package_id.0,
                actual: p.actual,
                predicted: p.predicted,
                residual: p.actual - p.predicted,
            }),
        )?;
        let points: Vec<(f64, f64)> = fit.predictions.iter().map(|p| (p.actual, p.predicted)).collect();
        write_text(
            &out.join("price_scatter.svg"),
            &report::scatter_svg(&points, &format!("Course {course}: true vs predicted price"), "true price", "predicted price"),
        )?;
        write_json(&out.join("price_fit.json"), &fit)?;
        cfg.write_snapshot(&out)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct CourseExplanation {
    course_id: CourseId,
    score: f64,
    bookings: usize,
    last_booked: Option<NaiveDate>,
}

#[derive(Serialize)]
struct ReferenceExplanation {
    user: UserId,
    date: NaiveDate,
    as_of: NaiveDate,
    target_month: u32,
    history: usize,
    courses: Vec<CourseExplanation>,
    selection: coldpack::reference::ReferenceSelection,
}

fn explain_ref(cfg: RunConfig, a: ExplainRefArgs) -> Result<()> {
    let data = require(a.data, &cfg.data, "data")?;
    let d = load_validated(&data)?;
    let as_of = a.as_of.unwrap_or(a.date - Duration::days(1));
    let user = UserId(a.user);
    let history = history_until(&d, user, as_of);
    let selection = select_reference(&history, a.date)
        .with_context(|| format!("user {user} up to {as_of}"))?;
    let own = &history;
    let courses = course_scores(own, a.date.month())
        .into_iter()
        .map(|(c, score)| CourseExplanation {
            course_id: c,
            score,
            bookings: own.iter().filter(|b| b.course_id == c).count(),
            last_booked: own.iter().filter(|b| b.course_id == c).map(|b| b.booked_at).max(),
        })
        .collect();
    let e = ReferenceExplanation {
        user,
        date: a.date,
        as_of,
        target_month: a.date.month(),
        history: history.len(),
        courses,
        selection,
    };
    emit_json(&e, a.out.as_deref(), &cfg)
}

#[derive(Serialize)]
struct Timings {
    stages_ms: BTreeMap<&'static str, u128>,
    total_ms: u128,
    peak_candidates: usize,
    mean_candidates: f64,
}

fn pipeline(mut cfg: RunConfig, a: PipelineArgs) -> Result<()> {
    let mut o = hyper_overrides(&a.hyper);
    window_overrides(&mut o, &a.window)?;
    cfg.apply(&o);
    apply_shape(&mut cfg, &a.shape)?;
    if a.no_tune {
        cfg.eval.tune = false;
    }
    cfg.validate()?;
    let out = require(a.out, &cfg.out, "out")?;
    let started = Instant::now();
    let mut stages = BTreeMap::new();
    let mut stage = |name: &'static str, t: Instant| {
        let ms = t.elapsed().as_millis();
        info!("stage {name} done in {ms} ms");
        stages.insert(name, ms);
    };

    let t = Instant::now();
    let data = out.join("data");
    let g = generate_dataset(&cfg.generator).context("stage gen")?;
    write_generated(&g, &cfg, &data).context("stage gen")?;
    let d = load_validated(&data).context("stage gen")?;
    stage("gen", t);

    let (cutoff, horizon) = (cfg.eval.cutoff, cfg.eval.horizon);
    let mut tuned = Tuned::default();
    if cfg.eval.tune {
        let t = Instant::now();
        let inner = cutoff - Duration::days(horizon);
        let val_dir = out.join("model_val");
        let mut model = train_into(&d, &data, inner, &cfg, &val_dir).context("stage train (validation model)")?;
        stage("train_validation", t);
        let t = Instant::now();
        tuned = tune_into(&mut model, &d, horizon, &cfg.eval.settings, &cfg, &val_dir).context("stage tune")?;
        stage("tune", t);
    }

    let t = Instant::now();
    let model_dir = out.join("model");
    train_into(&d, &data, cutoff, &cfg, &model_dir).context("stage train")?;
    if !tuned.results.is_empty() {
        let mut weights = store::load_model(&model_dir)?.weights;
        for (s, r) in &tuned.results {
            weights.insert(*s, r.weights);
        }
        store::save_weights(&weights, &model_dir).context("stage train")?;
    }
    stage("train", t);

    let t = Instant::now();
    let mut r = evaluate(&d, &experiment_config(&cfg), &tuned).context("stage eval")?;
    stage("eval", t);

    let t = Instant::now();
    r.elapsed_ms = started.elapsed().as_millis();
    write_report(&r, &cfg, &out.join("report")).context("stage report")?;
    cfg.write_snapshot(&out)?;
    stage("report", t);

    let total = started.elapsed().as_millis();
    info!("pipeline finished in {total} ms; peak candidate set {}", r.peak_candidates);
    write_json(
        &out.join("timings.json"),
        &Timings {
            stages_ms: stages,
            total_ms: total,
            peak_candidates: r.peak_candidates,
            mean_candidates: r.mean_candidates,
        },
    )?;
    Ok(())
}
