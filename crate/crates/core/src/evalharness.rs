//! Offline evaluation: EMP@n, the Jaccard baseline, temporal splits and the
//! four-setting experiment.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::{group_by_user, Booking, Catalog, Dataset, OptionFlag, Package, PackageId, UserId};
use crate::error::{Error, Result};
use crate::ranker::{
    hill_climb_weights, CandidateSet, FusionWeights, HillClimbConfig, HillClimbResult, ModelConfig,
    Setting, TrainedRecommender,
};

/// Mean over users of `|top-n ∩ truth| / |truth|`. Users with empty truth
/// are skipped; `None` when no user has truth.
pub fn emp_at_n<'a>(
    lists: impl IntoIterator<Item = (&'a [PackageId], &'a BTreeSet<PackageId>)>,
    n: usize,
) -> Option<f64> {
    let mut total = 0.0;
    let mut users = 0usize;
    for (ranked, truth) in lists {
        if truth.is_empty() {
            continue;
        }
        let hits = ranked.iter().take(n).filter(|p| truth.contains(p)).count();
        total += hits as f64 / truth.len() as f64;
        users += 1;
    }
    (users > 0).then(|| total / users as f64)
}

/// EMP@n over per-user maps; users missing from `recs` count as empty lists.
pub fn emp_at_n_map(
    recs: &BTreeMap<UserId, Vec<PackageId>>,
    truth: &BTreeMap<UserId, BTreeSet<PackageId>>,
    n: usize,
) -> Option<f64> {
    let empty = Vec::new();
    emp_at_n(
        truth
            .iter()
            .map(|(u, t)| (recs.get(u).unwrap_or(&empty).as_slice(), t)),
        n,
    )
}

/// Attribute tokens of a package: set option flags plus `name=value` tokens
/// for the count and promotion attributes.
pub fn attribute_tokens(p: &Package) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = OptionFlag::ALL
        .iter()
        .filter(|&&f| p.options.flag(f))
        .map(|f| f.name().to_string())
        .collect();
    out.insert(format!("min_party_size={}", p.options.min_party_size));
    out.insert(format!("min_num_parties={}", p.options.min_num_parties));
    out.insert(format!("num_laps={}", p.options.num_laps));
    out.insert(format!("promotion_type={}", p.promotion_type.name()));
    out
}

pub fn jaccard_tokens(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Jaccard similarity of the packages' attribute sets (price excluded).
pub fn jaccard_similarity(p: &Package, p_ref: &Package) -> f64 {
    jaccard_tokens(&attribute_tokens(p), &attribute_tokens(p_ref))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSplit {
    pub cutoff: NaiveDate,
    pub horizon: i64,
    /// Bookings made on or before the cutoff.
    pub train: Vec<Booking>,
    /// Bookings made in `(cutoff, cutoff + horizon]`.
    pub test: Vec<Booking>,
    /// Package ids each user booked in the test window.
    pub truth: BTreeMap<UserId, BTreeSet<PackageId>>,
}

impl TemporalSplit {
    /// First and last day of the test window.
    pub fn window(&self) -> (NaiveDate, NaiveDate) {
        (self.cutoff + Duration::days(1), self.cutoff + Duration::days(self.horizon))
    }
}

pub fn temporal_split(bookings: &[Booking], cutoff: NaiveDate, horizon: i64) -> Result<TemporalSplit> {
    if horizon < 1 {
        return Err(Error::config("horizon", "must be at least 1 day"));
    }
    let first = bookings.iter().map(|b| b.booked_at).min();
    let last = bookings.iter().map(|b| b.booked_at).max();
    match (first, last) {
        (Some(f), Some(l)) if f <= cutoff && cutoff <= l => {}
        (Some(f), Some(l)) => {
            return Err(Error::InvalidInput(format!(
                "cutoff {cutoff} is outside the booking span {f}..{l}"
            )))
        }
        _ => return Err(Error::InvalidInput("no bookings to split".into())),
    }
    let end = cutoff + Duration::days(horizon);
    let train: Vec<Booking> = bookings.iter().filter(|b| b.booked_at <= cutoff).cloned().collect();
    let test: Vec<Booking> = bookings
        .iter()
        .filter(|b| b.booked_at > cutoff && b.booked_at <= end)
        .cloned()
        .collect();
    if train.is_empty() {
        return Err(Error::InvalidInput(format!("no bookings on or before {cutoff}")));
    }
    if test.is_empty() {
        return Err(Error::InvalidInput(format!("no bookings in ({cutoff}, {end}]")));
    }
    let mut truth: BTreeMap<UserId, BTreeSet<PackageId>> = BTreeMap::new();
    for b in &test {
        truth.entry(b.user_id).or_default().insert(b.package_id);
    }
    Ok(TemporalSplit {
        cutoff,
        horizon,
        train,
        test,
        truth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub cutoff: NaiveDate,
    pub horizon: i64,
    pub settings: Vec<Setting>,
    pub n_max: usize,
    pub model: ModelConfig,
    /// Weight tuning on an inner validation window before the cutoff;
    /// `None` keeps uniform weights.
    pub tuning: Option<HillClimbConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cutoff: NaiveDate::from_ymd_opt(2013, 5, 31).expect("valid date"),
            horizon: 15,
            settings: Setting::ALL.to_vec(),
            n_max: 20,
            model: ModelConfig::default(),
            tuning: Some(HillClimbConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub start_emp: f64,
    pub tuned_emp: f64,
    pub rounds: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    pub setting: Setting,
    pub weights: FusionWeights,
    pub tuning: Option<TuningSummary>,
    /// EMP@n for n = 1..=n_max.
    pub emp: Vec<f64>,
    /// EMP@tune_n on the test window with the setting's uniform weights.
    pub uniform_emp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cutoff: NaiveDate,
    pub horizon: i64,
    pub n_max: usize,
    pub tune_n: usize,
    pub users_evaluated: usize,
    pub cold_users: usize,
    pub validation_users: usize,
    pub settings: Vec<SettingResult>,
    /// Recommended packages not active during the target window.
    pub inactive_recommendations: usize,
    pub peak_candidates: usize,
    pub mean_candidates: f64,
    pub elapsed_ms: u128,
}

impl ExperimentReport {
    pub fn result(&self, setting: Setting) -> Option<&SettingResult> {
        self.settings.iter().find(|r| r.setting == setting)
    }

    pub fn emp(&self, setting: Setting, n: usize) -> Option<f64> {
        self.result(setting)?.emp.get(n.checked_sub(1)?).copied()
    }

    /// `emp_a / emp_b - 1` at `n`.
    pub fn relative_improvement(&self, a: Setting, b: Setting, n: usize) -> Option<f64> {
        let (ea, eb) = (self.emp(a, n)?, self.emp(b, n)?);
        (eb > 0.0).then(|| ea / eb - 1.0)
    }
}

/// Candidate sets for every user with truth, using only train-side
/// histories.
pub fn candidate_sets(
    model: &TrainedRecommender,
    train: &[Booking],
    truth: &BTreeMap<UserId, BTreeSet<PackageId>>,
    window: (NaiveDate, NaiveDate),
    catalog: &Catalog,
) -> Result<Vec<(CandidateSet, BTreeSet<PackageId>)>> {
    let histories = group_by_user(train);
    let empty = Vec::new();
    truth
        .iter()
        .filter(|(_, t)| !t.is_empty())
        .map(|(u, t)| {
            let h = histories.get(u).unwrap_or(&empty);
            Ok((model.candidates(*u, h, window, catalog)?, t.clone()))
        })
        .collect()
}

/// Hill-climbs each setting's weights on `(model.as_of, model.as_of + horizon]`
/// using histories up to `model.as_of`. Returns the per-setting results and
/// the number of validation users.
pub fn tune_model(
    model: &TrainedRecommender,
    bookings: &[Booking],
    horizon: i64,
    catalog: &Catalog,
    settings: &[Setting],
    hill: &HillClimbConfig,
) -> Result<(BTreeMap<Setting, HillClimbResult>, usize)> {
    let split = temporal_split(bookings, model.as_of, horizon)?;
    let sets = candidate_sets(model, &split.train, &split.truth, split.window(), catalog)?;
    let mut out = BTreeMap::new();
    for &s in settings {
        out.insert(s, hill_climb_weights(&sets, s, hill)?);
    }
    Ok((out, sets.len()))
}

/// Tunes each setting on the window `(cutoff - horizon, cutoff]` with models
/// fitted on bookings up to `cutoff - horizon`.
pub fn tune_settings(
    dataset_bookings: &[Booking],
    catalog: &Catalog,
    cutoff: NaiveDate,
    horizon: i64,
    settings: &[Setting],
    model_cfg: &ModelConfig,
    hill: &HillClimbConfig,
) -> Result<(BTreeMap<Setting, HillClimbResult>, usize)> {
    let train: Vec<Booking> = dataset_bookings.iter().filter(|b| b.booked_at <= cutoff).cloned().collect();
    let inner_cutoff = cutoff - Duration::days(horizon);
    let inner: Vec<Booking> = train.iter().filter(|b| b.booked_at <= inner_cutoff).cloned().collect();
    let model = TrainedRecommender::fit(&inner, catalog, inner_cutoff, model_cfg)?;
    tune_model(&model, &train, horizon, catalog, settings, hill)
}

/// Weights tuned on the inner validation window, per setting.
#[derive(Debug, Clone, Default)]
pub struct Tuned {
    pub results: BTreeMap<Setting, HillClimbResult>,
    pub validation_users: usize,
}

/// Runs the offline experiment: optional weight tuning on an inner window,
/// fitting on the train side, and EMP@1..n_max per setting on the test
/// window.
pub fn run_experiment(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    check_experiment(cfg)?;
    let tuned = match &cfg.tuning {
        Some(hill) => {
            let catalog = Catalog::from_dataset(dataset);
            let (results, validation_users) = tune_settings(
                &dataset.bookings,
                &catalog,
                cfg.cutoff,
                cfg.horizon,
                &cfg.settings,
                &cfg.model,
                hill,
            )?;
            Tuned {
                results,
                validation_users,
            }
        }
        None => Tuned::default(),
    };
    let mut report = evaluate(dataset, cfg, &tuned)?;
    report.elapsed_ms = started.elapsed().as_millis();
    Ok(report)
}

fn check_experiment(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.settings.is_empty() {
        return Err(Error::config("settings", "no settings given"));
    }
    if cfg.n_max < 1 {
        return Err(Error::config("n_max", "must be at least 1"));
    }
    Ok(())
}

/// Fits on the train side and scores the test window. Settings missing
/// from `tuned` use uniform weights over their active components.
pub fn evaluate(dataset: &Dataset, cfg: &ExperimentConfig, tuned: &Tuned) -> Result<ExperimentReport> {
    let started = Instant::now();
    check_experiment(cfg)?;
    let catalog = Catalog::from_dataset(dataset);
    let split = temporal_split(&dataset.bookings, cfg.cutoff, cfg.horizon)?;

    let mut weights: BTreeMap<Setting, FusionWeights> = BTreeMap::new();
    let mut tuning: BTreeMap<Setting, TuningSummary> = BTreeMap::new();
    for &s in &cfg.settings {
        let w = match tuned.results.get(&s) {
            Some(r) => {
                tuning.insert(
                    s,
                    TuningSummary {
                        start_emp: r.start_emp,
                        tuned_emp: r.emp,
                        rounds: r.trajectory.len() - 1,
                        evaluations: r.evaluations,
                    },
                );
                r.weights
            }
            None => FusionWeights::uniform_for(s),
        };
        weights.insert(s, w);
    }
    let validation_users = tuned.validation_users;
    let tune_n = cfg.tuning.as_ref().map_or(5, |h| h.n);

    let model = TrainedRecommender::fit(&split.train, &catalog, cfg.cutoff, &cfg.model)?;
    let window = split.window();
    let sets = candidate_sets(&model, &split.train, &split.truth, window, &catalog)?;
    let cold_users = sets.iter().filter(|(s, _)| s.fallback).count();
    let peak_candidates = sets.iter().map(|(s, _)| s.len()).max().unwrap_or(0);
    let mean_candidates = if sets.is_empty() {
        0.0
    } else {
        sets.iter().map(|(s, _)| s.len()).sum::<usize>() as f64 / sets.len() as f64
    };

    let mut inactive = 0;
    let mut results = Vec::new();
    for &setting in &cfg.settings {
        let w = weights[&setting];
        let lists: Vec<(Vec<PackageId>, &BTreeSet<PackageId>)> = sets
            .iter()
            .map(|(s, t)| (s.top_ids(setting, &w, cfg.n_max), t))
            .collect();
        for (ids, _) in &lists {
            inactive += ids
                .iter()
                .filter(|id| !catalog.package(**id).is_some_and(|p| p.is_active_during(window.0, window.1)))
                .count();
        }
        let emp: Vec<f64> = (1..=cfg.n_max)
            .map(|n| emp_at_n(lists.iter().map(|(r, t)| (r.as_slice(), *t)), n).unwrap_or(0.0))
            .collect();
        let uniform = FusionWeights::uniform_for(setting);
        let uniform_lists: Vec<(Vec<PackageId>, &BTreeSet<PackageId>)> = sets
            .iter()
            .map(|(s, t)| (s.top_ids(setting, &uniform, tune_n), t))
            .collect();
        let uniform_emp =
            emp_at_n(uniform_lists.iter().map(|(r, t)| (r.as_slice(), *t)), tune_n).unwrap_or(0.0);
        results.push(SettingResult {
            setting,
            weights: w,
            tuning: tuning.remove(&setting),
            emp,
            uniform_emp,
        });
    }

    Ok(ExperimentReport {
        cutoff: cfg.cutoff,
        horizon: cfg.horizon,
        n_max: cfg.n_max,
        tune_n,
        users_evaluated: sets.len(),
        cold_users,
        validation_users,
        settings: results,
        inactive_recommendations: inactive,
        peak_candidates,
        mean_candidates,
        elapsed_ms: started.elapsed().as_millis(),
    })
}
