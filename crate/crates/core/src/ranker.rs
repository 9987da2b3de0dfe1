//! Score fusion, weight tuning and top-n package recommendation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{
    assign_cluster, build_user_vector, is_clustering_eligible, segment_users, spending_stats,
    KMeansConfig, UserSegmentation, UserVector, USER_DIMS,
};
use crate::coursecf::{self, CooccurrenceMatrix};
use crate::domain::{group_by_user, Booking, Catalog, CourseId, Package, PackageId, UserId};
use crate::error::{Error, Result};
use crate::evalharness::{emp_at_n, jaccard_similarity};
use crate::optionsim::{
    build_training_samples, option_match_score, train_option_models, LogisticConfig,
    OptionModelSet,
};
use crate::pricesim::{price_similarity, seasonal_ratio, SeasonalIndex};
use crate::reference::{select_reference, ReferenceSelection};

/// Scoring variants compared by the offline experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "jaccard")]
    Jaccard,
    #[serde(rename = "opt_only")]
    OptionOnly,
    #[serde(rename = "full_no_r")]
    FullNoSeasonal,
    #[serde(rename = "full_with_r")]
    FullWithSeasonal,
}

impl Setting {
    pub const ALL: [Setting; 4] = [
        Setting::Jaccard,
        Setting::OptionOnly,
        Setting::FullNoSeasonal,
        Setting::FullWithSeasonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Jaccard => "jaccard",
            Setting::OptionOnly => "opt_only",
            Setting::FullNoSeasonal => "full_no_r",
            Setting::FullWithSeasonal => "full_with_r",
        }
    }

    /// Which of the (price, option, course) slots carry a score. The
    /// Jaccard baseline fills the option slot and leaves price empty.
    pub fn active(self) -> [bool; 3] {
        match self {
            Setting::Jaccard | Setting::OptionOnly => [false, true, true],
            Setting::FullNoSeasonal | Setting::FullWithSeasonal => [true, true, true],
        }
    }

    /// Slot values for this setting; inactive slots are 0.
    pub fn slots(self, c: &Components) -> [f64; 3] {
        match self {
            Setting::Jaccard => [0.0, c.jaccard, c.course],
            Setting::OptionOnly => [0.0, c.option, c.course],
            Setting::FullNoSeasonal => [c.price, c.option, c.course],
            Setting::FullWithSeasonal => [c.price_seasonal, c.option, c.course],
        }
    }

    /// Parses a comma-separated list; `all` expands to every setting.
    pub fn parse_list(s: &str) -> Result<Vec<Setting>> {
        if s.trim() == "all" {
            return Ok(Setting::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let setting: Setting = part.parse()?;
            if !out.contains(&setting) {
                out.push(setting);
            }
        }
        if out.is_empty() {
            return Err(Error::config("settings", "no settings given"));
        }
        Ok(out)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::config("settings", format!("unknown setting {s:?}")))
    }
}

/// Fusion weights on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub w_p: f64,
    pub w_o: f64,
    pub w_c: f64,
}

impl FusionWeights {
    /// Normalizes non-negative weights to sum to 1.
    pub fn new(w_p: f64, w_o: f64, w_c: f64) -> Result<Self> {
        Self::from_array([w_p, w_o, w_c])
    }

    pub fn from_array(w: [f64; 3]) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(format!("weights must be finite and >= 0: {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidInput("weights sum to zero".into()));
        }
        Ok(Self {
            w_p: w[0] / sum,
            w_o: w[1] / sum,
            w_c: w[2] / sum,
        })
    }

    pub fn uniform() -> Self {
        Self::uniform_for(Setting::FullWithSeasonal)
    }

    /// Equal weight on the setting's active slots.
    pub fn uniform_for(setting: Setting) -> Self {
        let active = setting.active();
        let w = active.map(|a| if a { 1.0 } else { 0.0 });
        Self::from_array(w).expect("at least one active slot")
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.w_p, self.w_o, self.w_c]
    }
}

/// `w_p * s_price + w_o * s_opt + w_c * s_course` over normalized components.
pub fn final_score(slots: [f64; 3], w: &FusionWeights) -> f64 {
    w.w_p * slots[0] + w.w_o * slots[1] + w.w_c * slots[2]
}

/// Per-package component scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    /// Price similarity with r = 1.
    pub price: f64,
    /// Price similarity with the seasonal ratio.
    pub price_seasonal: f64,
    pub option: f64,
    pub course: f64,
    pub jaccard: f64,
}

impl Components {
    fn get(&self, i: usize) -> f64 {
        [self.price, self.price_seasonal, self.option, self.course, self.jaccard][i]
    }

    fn set(&mut self, i: usize, v: f64) {
        match i {
            0 => self.price = v,
            1 => self.price_seasonal = v,
            2 => self.option = v,
            3 => self.course = v,
            _ => self.jaccard = v,
        }
    }
}

/// Min-max normalizes each component over the slice; constant components map to 0.
pub fn normalize_components(raw: &[Components]) -> Vec<Components> {
    let mut out = vec![Components::default(); raw.len()];
    for i in 0..5 {
        let (lo, hi) = raw
            .iter()
            .map(|c| c.get(i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let range = hi - lo;
        for (o, c) in out.iter_mut().zip(raw) {
            o.set(i, if range > 0.0 { (c.get(i) - lo) / range } else { 0.0 });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub package_id: PackageId,
    pub course_id: CourseId,
    pub raw: Components,
    pub normalized: Components,
}

/// All scored candidates for one user and window, in package id order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub user: UserId,
    pub window: (NaiveDate, NaiveDate),
    pub reference: Option<ReferenceSelection>,
    /// Cold user: candidates come from the most-booked courses and are
    /// ranked by option score alone.
    pub fallback: bool,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPackage {
    pub package_id: PackageId,
    pub course_id: CourseId,
    pub score: f64,
    pub components: Components,
    pub normalized: Components,
}

impl CandidateSet {
    fn scores(&self, setting: Setting, w: &FusionWeights) -> Vec<f64> {
        self.candidates
            .iter()
            .map(|c| {
                if self.fallback {
                    c.raw.option
                } else {
                    final_score(setting.slots(&c.normalized), w)
                }
            })
            .collect()
    }

    fn order(&self, setting: Setting, w: &FusionWeights, n: usize) -> (Vec<usize>, Vec<f64>) {
        let scores = self.scores(setting, w);
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        // Candidates are in package id order, so a stable sort breaks ties
        // toward the lower id.
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        idx.truncate(n);
        (idx, scores)
    }

    /// Top-n package ids by fused score (ties: lower package id).
    pub fn top_ids(&self, setting: Setting, w: &FusionWeights, n: usize) -> Vec<PackageId> {
        self.order(setting, w, n)
            .0
            .into_iter()
            .map(|i| self.candidates[i].package_id)
            .collect()
    }

    pub fn rank(&self, setting: Setting, w: &FusionWeights, n: usize) -> Vec<ScoredPackage> {
        let (idx, scores) = self.order(setting, w, n);
        idx.into_iter()
            .map(|i| {
                let c = &self.candidates[i];
                ScoredPackage {
                    package_id: c.package_id,
                    course_id: c.course_id,
                    score: scores[i],
                    components: c.raw,
                    normalized: c.normalized,
                }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub user: UserId,
    pub window: (NaiveDate, NaiveDate),
    pub setting: Setting,
    pub weights: FusionWeights,
    pub fallback: bool,
    pub reference: Option<ReferenceSelection>,
    pub candidates: usize,
    pub items: Vec<ScoredPackage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kmeans: KMeansConfig,
    /// k-means restarts use seeds `seed .. seed + restarts`.
    pub restarts: u64,
    pub seed: u64,
    pub logistic: LogisticConfig,
    pub top_m: usize,
    pub omega: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kmeans: KMeansConfig::default(),
            restarts: 10,
            seed: 0,
            logistic: LogisticConfig::default(),
            top_m: 20,
            omega: 1000.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kmeans.k < 1 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if self.restarts < 1 {
            return Err(Error::config("restarts", "must be at least 1"));
        }
        if self.top_m < 1 {
            return Err(Error::config("top_m", "must be at least 1"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::config("omega", "must be positive"));
        }
        if !(self.logistic.l2 >= 0.0) {
            return Err(Error::config("lambda", "must be non-negative"));
        }
        Ok(())
    }

    pub fn kmeans_seeds(&self) -> Vec<u64> {
        (self.seed..self.seed + self.restarts).collect()
    }
}

/// All fitted artifacts. Immutable after fitting; weights are set per setting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRecommender {
    pub config: ModelConfig,
    pub as_of: NaiveDate,
    pub segmentation: UserSegmentation,
    pub option_models: OptionModelSet,
    pub cooccurrence: CooccurrenceMatrix,
    pub seasonal_index: SeasonalIndex,
    pub weights: BTreeMap<Setting, FusionWeights>,
}

impl TrainedRecommender {
    /// Fits every component on `train`, which must contain only bookings
    /// made on or before `as_of`. The seasonal index uses packages that
    /// became active on or before `as_of`.
    pub fn fit(train: &[Booking], catalog: &Catalog, as_of: NaiveDate, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(b) = train.iter().find(|b| b.booked_at > as_of) {
            return Err(Error::InvalidInput(format!(
                "booking by user {} on {} is after the training date {as_of}",
                b.user_id, b.booked_at
            )));
        }
        let histories = group_by_user(train);
        let mut vectors: BTreeMap<UserId, UserVector> = BTreeMap::new();
        let mut eligible = BTreeSet::new();
        for (user, h) in &histories {
            vectors.insert(*user, build_user_vector(h, catalog)?);
            if is_clustering_eligible(h) {
                eligible.insert(*user);
            }
        }
        let segmentation = segment_users(&vectors, &eligible, &cfg.kmeans, &cfg.kmeans_seeds())?;
        let samples = build_training_samples(&histories, catalog, &segmentation)?;
        let option_models = train_option_models(
            &samples,
            segmentation.clustering.k,
            USER_DIMS,
            &cfg.logistic,
        )?;
        let cooccurrence =
            CooccurrenceMatrix::build_with_courses(catalog.course_ids().iter().copied(), train);
        let seasonal_index = SeasonalIndex::fit(catalog.packages().filter(|p| p.active_from <= as_of));
        Ok(Self {
            config: cfg.clone(),
            as_of,
            segmentation,
            option_models,
            cooccurrence,
            seasonal_index,
            weights: Setting::ALL.iter().map(|&s| (s, FusionWeights::uniform_for(s))).collect(),
        })
    }

    pub fn weights_for(&self, setting: Setting) -> FusionWeights {
        self.weights
            .get(&setting)
            .copied()
            .unwrap_or_else(|| FusionWeights::uniform_for(setting))
    }

    fn user_state(&self, user: UserId, history: &[Booking], catalog: &Catalog) -> Result<(Vec<f64>, usize)> {
        let v = build_user_vector(history, catalog)?;
        let std = self.segmentation.standardizer.apply(&v.to_array())?;
        let cluster = self
            .segmentation
            .cluster_of(user)
            .unwrap_or_else(|| assign_cluster(&std, &self.segmentation.clustering));
        Ok((std, cluster))
    }

    /// Scores every package of the candidate courses active during `window`.
    /// `history` must be the user's bookings in `booked_at` order.
    pub fn candidates(
        &self,
        user: UserId,
        history: &[Booking],
        window: (NaiveDate, NaiveDate),
        catalog: &Catalog,
    ) -> Result<CandidateSet> {
        if window.1 < window.0 {
            return Err(Error::InvalidInput(format!(
                "window end {} precedes start {}",
                window.1, window.0
            )));
        }
        if history.is_empty() {
            return self.cold_candidates(user, window, catalog);
        }
        let reference = select_reference(history, window.0)?;
        let ref_pkg = catalog.package(reference.package_id).ok_or_else(|| {
            Error::InvalidInput(format!("reference package {} not in catalog", reference.package_id))
        })?;
        let (std, cluster) = self.user_state(user, history, catalog)?;
        let probs = self.option_models.probabilities(&std, cluster)?;
        let (_, sigma) = spending_stats(history)?;
        let course_scores = coursecf::course_scores(history, &self.cooccurrence);
        let courses = coursecf::filter_courses(&course_scores, self.config.top_m, Some(reference.course_id));

        let mut packages: Vec<&Package> = courses
            .iter()
            .flat_map(|&c| catalog.active_packages(c, window.0, window.1))
            .collect();
        packages.sort_by_key(|p| p.id);
        packages.dedup_by_key(|p| p.id);
        let raw = packages
            .iter()
            .map(|p| {
                let r = seasonal_ratio(&self.seasonal_index, p.play_month, ref_pkg.play_month);
                Ok(Components {
                    price: price_similarity(p, ref_pkg, sigma, self.config.omega, 1.0)?,
                    price_seasonal: price_similarity(p, ref_pkg, sigma, self.config.omega, r)?,
                    option: option_match_score(&p.options.flags(), &probs),
                    course: course_scores.get(&p.course_id).copied().unwrap_or(0.0),
                    jaccard: jaccard_similarity(p, ref_pkg),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(assemble(user, window, Some(reference), false, &packages, raw))
    }

    fn cold_candidates(
        &self,
        user: UserId,
        window: (NaiveDate, NaiveDate),
        catalog: &Catalog,
    ) -> Result<CandidateSet> {
        let std = vec![0.0; self.segmentation.standardizer.dims()];
        let cluster = assign_cluster(&std, &self.segmentation.clustering);
        let probs = self.option_models.probabilities(&std, cluster)?;
        let mut popular: Vec<(CourseId, u32)> = self
            .cooccurrence
            .courses()
            .iter()
            .map(|&c| (c, self.cooccurrence.popularity(c)))
            .filter(|&(_, n)| n > 0)
            .collect();
        popular.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        popular.truncate(self.config.top_m);
        let mut packages: Vec<&Package> = popular
            .iter()
            .flat_map(|&(c, _)| catalog.active_packages(c, window.0, window.1))
            .collect();
        packages.sort_by_key(|p| p.id);
        let raw = packages
            .iter()
            .map(|p| Components {
                option: option_match_score(&p.options.flags(), &probs),
                ..Components::default()
            })
            .collect();
        Ok(assemble(user, window, None, true, &packages, raw))
    }

    pub fn recommend(
        &self,
        user: UserId,
        history: &[Booking],
        window: (NaiveDate, NaiveDate),
        n: usize,
        catalog: &Catalog,
        setting: Setting,
    ) -> Result<Recommendation> {
        let set = self.candidates(user, history, window, catalog)?;
        let weights = self.weights_for(setting);
        Ok(Recommendation {
            user,
            window,
            setting,
            weights,
            fallback: set.fallback,
            reference: set.reference.clone(),
            candidates: set.len(),
            items: set.rank(setting, &weights, n),
        })
    }
}

fn assemble(
    user: UserId,
    window: (NaiveDate, NaiveDate),
    reference: Option<ReferenceSelection>,
    fallback: bool,
    packages: &[&Package],
    raw: Vec<Components>,
) -> CandidateSet {
    let normalized = normalize_components(&raw);
    let candidates = packages
        .iter()
        .zip(raw.into_iter().zip(normalized))
        .map(|(p, (raw, normalized))| Candidate {
            package_id: p.id,
            course_id: p.course_id,
            raw,
            normalized,
        })
        .collect();
    CandidateSet {
        user,
        window,
        reference,
        fallback,
        candidates,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillClimbConfig {
    pub n: usize,
    pub step: f64,
    pub min_step: f64,
    pub max_rounds: usize,
    /// Orders neighbor evaluation; equally good neighbors go to the first
    /// one visited.
    pub seed: u64,
}

impl Default for HillClimbConfig {
    fn default() -> Self {
        Self {
            n: 5,
            step: 0.1,
            min_step: 0.01,
            max_rounds: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillClimbStep {
    pub round: usize,
    pub weights: FusionWeights,
    pub emp: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillClimbResult {
    pub start: FusionWeights,
    pub start_emp: f64,
    pub weights: FusionWeights,
    pub emp: f64,
    /// Accepted points, starting with the start point.
    pub trajectory: Vec<HillClimbStep>,
    pub evaluations: usize,
}

fn neighbors(w: &FusionWeights, active: [bool; 3], step: f64) -> Vec<FusionWeights> {
    let base = w.to_array();
    let mut out = Vec::new();
    for i in (0..3).filter(|&i| active[i]) {
        for j in (0..3).filter(|&j| active[j] && j != i) {
            let mut v = base;
            v[i] += step;
            v[j] = (v[j] - step).max(0.0);
            if let Ok(n) = FusionWeights::from_array(v) {
                let moved = n.to_array().iter().zip(&base).any(|(a, b)| (a - b).abs() > 1e-12);
                if moved {
                    out.push(n);
                }
            }
        }
    }
    out
}

/// Hill-climbing on the simplex restricted to the `active` coordinates.
/// Moves to the best strictly improving neighbor, halves the step when no
/// neighbor improves, and stops when the step falls below `min_step` or after
/// `max_rounds` rounds.
pub fn hill_climb(
    active: [bool; 3],
    start: FusionWeights,
    cfg: &HillClimbConfig,
    mut eval: impl FnMut(&FusionWeights) -> f64,
) -> Result<HillClimbResult> {
    if !(cfg.step > 0.0) || !(cfg.min_step > 0.0) {
        return Err(Error::config("step", "step sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = start;
    let mut current_emp = eval(&current);
    let mut evaluations = 1;
    let mut step = cfg.step;
    let mut trajectory = vec![HillClimbStep {
        round: 0,
        weights: current,
        emp: current_emp,
        step,
    }];
    let mut round = 0;
    while step >= cfg.min_step && round < cfg.max_rounds {
        round += 1;
        let mut cand = neighbors(&current, active, step);
        cand.shuffle(&mut rng);
        let mut best: Option<(FusionWeights, f64)> = None;
        for w in cand {
            let e = eval(&w);
            evaluations += 1;
            if e > current_emp && best.is_none_or(|(_, be)| e > be) {
                best = Some((w, e));
            }
        }
        match best {
            Some((w, e)) => {
                current = w;
                current_emp = e;
                trajectory.push(HillClimbStep {
                    round,
                    weights: w,
                    emp: e,
                    step,
                });
            }
            None => step /= 2.0,
        }
    }
    Ok(HillClimbResult {
        start,
        start_emp: trajectory[0].emp,
        weights: current,
        emp: current_emp,
        trajectory,
        evaluations,
    })
}

/// Tunes one setting's weights on precomputed validation candidate sets,
/// maximizing EMP@n from the setting's uniform weights.
pub fn hill_climb_weights(
    validation: &[(CandidateSet, BTreeSet<PackageId>)],
    setting: Setting,
    cfg: &HillClimbConfig,
) -> Result<HillClimbResult> {
    if !validation.iter().any(|(_, t)| !t.is_empty()) {
        return Err(Error::InvalidInput("validation split has no truth".into()));
    }
    let eval = |w: &FusionWeights| {
        let lists: Vec<(Vec<PackageId>, &BTreeSet<PackageId>)> = validation
            .iter()
            .map(|(set, truth)| (set.top_ids(setting, w, cfg.n), truth))
            .collect();
        emp_at_n(lists.iter().map(|(r, t)| (r.as_slice(), *t)), cfg.n).unwrap_or(0.0)
    };
    hill_climb(setting.active(), FusionWeights::uniform_for(setting), cfg, eval)
}
