//! Synthetic booking corpus generator.
//!
//! Users belong to one of five behavioral archetypes (pairs, friends,
//! refined, weekday, casual). Each archetype fixes option preferences,
//! spending level and dispersion, and party habits. Packages are short-lived
//! and priced by a linear ground truth scaled by a monthly seasonal index.
//! The archetype table, seasonal shape and lifespan mixture below are
//! generator defaults chosen to reproduce qualitative corpus properties;
//! they are not measured values.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Duration, Months, NaiveDate};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gumbel, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{
    is_holiday, Booking, Course, CourseId, Dataset, Money, OptionFlag, OptionVector, Package,
    PackageId, PromotionType, UserId, NUM_OPTION_FLAGS,
};
use crate::error::{Error, Result};
use crate::pricesim::{main_effect_names, main_effects, MAIN_EFFECTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    /// Next-booking preference per option, in `OptionFlag::ALL` order.
    pub option_rates: [f64; NUM_OPTION_FLAGS],
    /// Typical spend per booking at a seasonal index of 1.
    pub budget: f64,
    /// Log-normal sigma of the budget across users.
    pub budget_spread: f64,
    /// Log-normal sigma of the per-booking target price. Zero means the
    /// user only books within `spend_band` of the target.
    pub spend_dispersion: f64,
    pub party_sizes: Vec<(u8, f64)>,
    pub num_parties: Vec<(u8, f64)>,
    /// Probability that a single booking brings one party more than usual.
    pub party_jitter: f64,
    /// Preferred course rating; 0 disables the preference.
    pub rating_preference: f64,
}

pub fn default_archetypes() -> Vec<Archetype> {
    let a = |name: &str,
             option_rates,
             budget,
             spend_dispersion,
             party_sizes: &[(u8, f64)],
             num_parties: &[(u8, f64)],
             party_jitter,
             rating_preference| Archetype {
        name: name.to_string(),
        option_rates,
        budget,
        budget_spread: 0.10,
        spend_dispersion,
        party_sizes: party_sizes.to_vec(),
        num_parties: num_parties.to_vec(),
        party_jitter,
        rating_preference,
    };
    vec![
        a("pairs", [0.85, 0.05, 0.05, 0.90, 0.85], 9_500.0, 0.0, &[(2, 1.0)], &[(1, 1.0)], 0.0, 0.0),
        a("friends", [0.90, 0.10, 0.85, 0.85, 0.05], 10_800.0, 0.0, &[(4, 1.0)], &[(2, 1.0)], 0.0, 0.0),
        a("refined", [0.80, 0.90, 0.10, 0.50, 0.10], 18_000.0, 0.7, &[(4, 1.0)], &[(1, 1.0)], 0.0, 4.3),
        a("weekday", [0.15, 0.05, 0.15, 0.05, 0.10], 7_000.0, 0.0, &[(3, 1.0)], &[(1, 1.0)], 0.0, 0.0),
        a(
            "casual",
            [0.50, 0.30, 0.30, 0.50, 0.30],
            10_500.0,
            0.20,
            &[(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)],
            &[(1, 1.0)],
            0.0,
            0.0,
        ),
    ]
}

/// Package lifespan mixture: short specials, a monthly bulk, and a long tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanMixture {
    pub short_weight: f64,
    pub short_days: (i64, i64),
    pub bulk_weight: f64,
    pub bulk_days: (i64, i64),
    pub long_days: (i64, i64),
}

impl Default for LifespanMixture {
    fn default() -> Self {
        Self {
            short_weight: 0.20,
            short_days: (1, 7),
            bulk_weight: 0.70,
            bulk_days: (14, 31),
            long_days: (32, 90),
        }
    }
}

impl LifespanMixture {
    /// Probability mass at or below `days`, computed from the mixture.
    pub fn cdf(&self, days: i64) -> f64 {
        let part = |(lo, hi): (i64, i64)| {
            if days < lo {
                0.0
            } else if days >= hi {
                1.0
            } else {
                (days - lo + 1) as f64 / (hi - lo + 1) as f64
            }
        };
        let long_weight = 1.0 - self.short_weight - self.bulk_weight;
        self.short_weight * part(self.short_days)
            + self.bulk_weight * part(self.bulk_days)
            + long_weight * part(self.long_days)
    }
}

/// Draws a package lifespan in days (always at least 1).
pub fn sample_package_lifespan(mix: &LifespanMixture, rng: &mut impl Rng) -> i64 {
    let u: f64 = rng.random();
    let (lo, hi) = if u < mix.short_weight {
        mix.short_days
    } else if u < mix.short_weight + mix.bulk_weight {
        mix.bulk_days
    } else {
        mix.long_days
    };
    rng.random_range(lo..=hi).max(1)
}

fn default_seasonal_index() -> [f64; 12] {
    let raw = [0.86, 0.88, 1.00, 1.10, 1.14, 1.02, 0.92, 0.90, 1.00, 1.10, 1.12, 0.96];
    normalize_mean(raw)
}

fn normalize_mean(mut v: [f64; 12]) -> [f64; 12] {
    let m = v.iter().sum::<f64>() / 12.0;
    for x in &mut v {
        *x /= m;
    }
    v
}

/// Default coefficients aligned with [`main_effect_names`].
pub fn default_price_coefficients() -> Vec<f64> {
    let mut c = vec![0.0; MAIN_EFFECTS];
    let names = main_effect_names();
    let mut set = |name: &str, v: f64| {
        let i = names.iter().position(|n| n == name).expect("known feature");
        c[i] = v;
    };
    set("dow_6", 1_500.0);
    set("dow_7", 1_200.0);
    set("lunch", 1_000.0);
    set("caddie", 2_500.0);
    set("competition", 500.0);
    set("pair_party", -300.0);
    set("min_party_size", -200.0);
    set("min_num_parties", -300.0);
    set("num_laps", 2_500.0);
    set("promo_early_bird", -800.0);
    set("promo_last_minute", -1_500.0);
    set("promo_limited", -600.0);
    set("shortness", 10.0);
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_users: usize,
    pub n_courses: usize,
    pub n_regions: usize,
    pub n_packages_per_course_month: usize,
    /// Courses compared per booking; the package is chosen from their
    /// pooled offers.
    pub courses_considered: usize,
    /// Share of packages drawn from segment-oriented plans rather than
    /// independent option flags.
    pub plan_share: f64,
    pub start: NaiveDate,
    /// Simulated history length in months.
    pub months: u32,
    /// Extra days simulated after the history so a holdout window exists.
    pub tail_days: i64,
    /// Share of users per archetype, aligned with `archetypes`.
    pub cluster_mix: Vec<f64>,
    pub archetypes: Vec<Archetype>,
    /// Noise sd (minor units) at the base price level; grows with price.
    pub price_noise_sd: f64,
    pub bookings_per_user_year: f64,
    /// Relative band around the target price for non-dispersed archetypes.
    pub spend_band: f64,
    pub base_price: Money,
    pub min_price: Money,
    pub price_coefficients: Vec<f64>,
    pub seasonal_index: [f64; 12],
    pub course_level_spread: f64,
    pub lifespan: LifespanMixture,
    /// Weight of the option log-likelihood in package choice.
    pub option_weight: f64,
    /// Weight of the relative price gap in package choice.
    pub price_weight: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_users: 10_000,
            n_courses: 200,
            n_regions: 10,
            n_packages_per_course_month: 12,
            courses_considered: 3,
            plan_share: 0.6,
            start: NaiveDate::from_ymd_opt(2012, 6, 1).expect("valid date"),
            months: 12,
            tail_days: 30,
            cluster_mix: vec![0.35, 0.35, 0.10, 0.10, 0.10],
            archetypes: default_archetypes(),
            price_noise_sd: 300.0,
            bookings_per_user_year: 4.5,
            spend_band: 0.15,
            base_price: 8_000,
            min_price: 1_000,
            price_coefficients: default_price_coefficients(),
            seasonal_index: default_seasonal_index(),
            course_level_spread: 0.20,
            lifespan: LifespanMixture::default(),
            option_weight: 2.5,
            price_weight: 6.0,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_users", self.n_users),
            ("n_courses", self.n_courses),
            ("n_regions", self.n_regions),
            ("n_packages_per_course_month", self.n_packages_per_course_month),
            ("months", self.months as usize),
            ("courses_considered", self.courses_considered),
        ];
        for (field, v) in counts {
            if v < 1 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.cluster_mix.len() != self.archetypes.len() {
            return Err(Error::config(
                "cluster_mix",
                format!(
                    "has {} entries but there are {} archetypes",
                    self.cluster_mix.len(),
                    self.archetypes.len()
                ),
            ));
        }
        let sum: f64 = self.cluster_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.cluster_mix.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::config(
                "cluster_mix",
                format!("proportions must be non-negative and sum to 1 (sum = {sum})"),
            ));
        }
        if !(0.0..=1.0).contains(&self.plan_share) {
            return Err(Error::config("plan_share", "must lie in [0, 1]"));
        }
        if self.seasonal_index.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::config("seasonal_index", "entries must be positive"));
        }
        let mean = self.seasonal_index.iter().sum::<f64>() / 12.0;
        if (mean - 1.0).abs() > 1e-9 {
            return Err(Error::config("seasonal_index", format!("mean must be 1 (got {mean})")));
        }
        if self.price_coefficients.len() != MAIN_EFFECTS {
            return Err(Error::config(
                "price_coefficients",
                format!("expected {MAIN_EFFECTS} entries"),
            ));
        }
        if !(self.bookings_per_user_year > 0.0) {
            return Err(Error::config("bookings_per_user_year", "must be positive"));
        }
        if !(self.price_noise_sd >= 0.0) {
            return Err(Error::config("price_noise_sd", "must be non-negative"));
        }
        let w = &self.lifespan;
        if w.short_weight < 0.0 || w.bulk_weight < 0.0 || w.short_weight + w.bulk_weight > 1.0 {
            return Err(Error::config("lifespan", "weights must form a distribution"));
        }
        for a in &self.archetypes {
            if a.party_sizes.is_empty() || a.num_parties.is_empty() {
                return Err(Error::config("archetypes", format!("{}: empty party table", a.name)));
            }
        }
        if self.tail_days < 0 {
            return Err(Error::config("tail_days", "must be non-negative"));
        }
        Ok(())
    }

    /// Last simulated day (inclusive).
    pub fn end(&self) -> NaiveDate {
        self.start + Months::new(self.months) + Duration::days(self.tail_days) - Duration::days(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingGroundTruth {
    pub base_price: Money,
    pub feature_names: Vec<String>,
    /// Aligned with `feature_names`. Attribute terms are scaled by the
    /// seasonal index together with the base price; month, weekday and
    /// promotional terms are additive.
    pub coefficients: Vec<f64>,
    pub seasonal_index: [f64; 12],
    /// Multiplier on the whole price level per course (1 when absent).
    pub course_levels: BTreeMap<CourseId, f64>,
    pub noise_sd: f64,
    pub min_price: Money,
}

impl PricingGroundTruth {
    /// Flat ground truth: no coefficients, flat season, no noise.
    pub fn flat(base_price: Money) -> Self {
        Self {
            base_price,
            feature_names: main_effect_names(),
            coefficients: vec![0.0; MAIN_EFFECTS],
            seasonal_index: [1.0; 12],
            course_levels: BTreeMap::new(),
            noise_sd: 0.0,
            min_price: 0,
        }
    }

    pub fn set_coefficient(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self
            .feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config("coefficients", format!("unknown feature {name}")))?;
        self.coefficients[i] = value;
        Ok(())
    }

    /// Noise-free price of a package.
    pub fn price_level(&self, pkg: &Package) -> f64 {
        let x = main_effects(pkg);
        let (periods, rest) = x.split_at(17);
        let (attrs, promos) = rest.split_at(7);
        let (c_periods, c_rest) = self.coefficients.split_at(17);
        let (c_attrs, c_promos) = c_rest.split_at(7);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let season = self.seasonal_index[(pkg.play_month as usize).clamp(1, 12) - 1];
        let course = self.course_levels.get(&pkg.course_id).copied().unwrap_or(1.0);
        course
            * (season * (self.base_price as f64 + dot(attrs, c_attrs))
                + dot(periods, c_periods)
                + dot(promos, c_promos))
    }
}

/// Linear ground-truth price plus noise whose sd grows with the price level,
/// rounded to minor units and floored at `min_price`.
pub fn ground_truth_price(pkg: &Package, gt: &PricingGroundTruth, rng: &mut impl Rng) -> Money {
    let level = gt.price_level(pkg);
    let noisy = if gt.noise_sd > 0.0 {
        let sd = gt.noise_sd * (level / gt.base_price.max(1) as f64).max(0.0);
        level + sd * rng.sample::<f64, _>(rand_distr::StandardNormal)
    } else {
        level
    };
    (noisy.round() as Money).max(gt.min_price)
}

pub struct Generated {
    pub dataset: Dataset,
    pub ground_truth: PricingGroundTruth,
    /// Planted archetype index per user, in user id order.
    pub labels: BTreeMap<UserId, usize>,
}

struct UserProfile {
    archetype: usize,
    rates: [f64; NUM_OPTION_FLAGS],
    budget: f64,
    home_region: usize,
    favored_month: u32,
    favorites: Vec<CourseId>,
    party_size: u8,
    num_parties: u8,
}

fn pick<T: Copy>(table: &[(T, f64)], rng: &mut impl Rng) -> T {
    let dist = WeightedIndex::new(table.iter().map(|(_, w)| *w)).expect("non-empty weights");
    table[dist.sample(rng)].0
}

fn holiday_calendar(start: NaiveDate, end: NaiveDate) -> BTreeSet<NaiveDate> {
    // Fixed-date approximation of national holidays.
    const DAYS: [(u32, u32); 15] = [
        (1, 1), (1, 14), (2, 11), (3, 20), (4, 29), (5, 3), (5, 4), (5, 5),
        (7, 15), (9, 16), (9, 23), (10, 14), (11, 3), (11, 23), (12, 23),
    ];
    (start.year()..=end.year())
        .flat_map(|y| DAYS.iter().filter_map(move |&(m, d)| NaiveDate::from_ymd_opt(y, m, d)))
        .filter(|d| *d >= start && *d <= end)
        .collect()
}

fn month_starts(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut m = start.with_day(1).expect("day 1 exists");
    while m <= end {
        out.push(m);
        m = m + Months::new(1);
    }
    out
}

fn days_in_month(first: NaiveDate) -> i64 {
    ((first + Months::new(1)) - first).num_days()
}

/// Couple, competition, premium and weekday plans.
const PLANS: [([f64; NUM_OPTION_FLAGS], f64); 4] = [
    ([0.95, 0.05, 0.05, 0.90, 0.90], 0.0),
    ([0.95, 0.05, 0.90, 0.90, 0.05], 0.6),
    ([0.90, 0.95, 0.05, 0.50, 0.05], 0.0),
    ([0.10, 0.05, 0.10, 0.05, 0.05], 0.0),
];

struct PackageFactory<'a> {
    cfg: &'a GeneratorConfig,
    calendar: &'a BTreeSet<NaiveDate>,
}

impl PackageFactory<'_> {
    /// An unpriced package starting on `active_from`.
    fn draw(&self, id: PackageId, course_id: CourseId, active_from: NaiveDate, rng: &mut impl Rng) -> Package {
        let span = sample_package_lifespan(&self.cfg.lifespan, rng);
        let active_to = active_from + Duration::days(span);
        let days: Vec<NaiveDate> = (0..=span).map(|i| active_from + Duration::days(i)).collect();
        let holidays: Vec<&NaiveDate> = days.iter().filter(|d| is_holiday(**d, self.calendar)).collect();
        let weekdays: Vec<&NaiveDate> = days.iter().filter(|d| !is_holiday(**d, self.calendar)).collect();
        // Flag probabilities in `OptionFlag::ALL` order and the minimum
        // party count; most packages follow a plan aimed at one segment.
        let (rates, multi_party) = if rng.random_bool(self.cfg.plan_share) {
            PLANS[rng.random_range(0..PLANS.len())]
        } else {
            ([0.55, 0.30, 0.20, 0.45, 0.15], 0.15)
        };
        let want_holiday = rng.random_bool(rates[3]);
        let (holiday, play_day) = match (want_holiday && !holidays.is_empty(), weekdays.is_empty()) {
            (true, _) | (false, true) => (true, *holidays[rng.random_range(0..holidays.len())]),
            (false, false) => (false, *weekdays[rng.random_range(0..weekdays.len())]),
        };
        let pair_party = rng.random_bool(rates[4]);
        let options = OptionVector {
            lunch: rng.random_bool(rates[0]),
            caddie: rng.random_bool(rates[1]),
            competition: rng.random_bool(rates[2]),
            holiday,
            pair_party,
            min_party_size: if pair_party {
                2
            } else {
                pick(&[(1, 0.35), (2, 0.45), (3, 0.15), (4, 0.05)], rng)
            },
            min_num_parties: if rng.random_bool(multi_party) { 2 } else { 1 },
            num_laps: pick(&[(1, 0.8), (2, 0.2)], rng),
        };
        let promotion_type = if span <= 7 {
            pick(
                &[(PromotionType::LastMinute, 0.5), (PromotionType::Limited, 0.3), (PromotionType::None, 0.2)],
                rng,
            )
        } else {
            pick(
                &[(PromotionType::None, 0.6), (PromotionType::EarlyBird, 0.25), (PromotionType::Limited, 0.15)],
                rng,
            )
        };
        Package {
            id,
            course_id,
            active_from,
            active_to,
            play_month: active_from.month(),
            play_dow: play_day.weekday().number_from_monday(),
            options,
            price: 0,
            promotion_type,
            shortness: span,
        }
    }
}

/// `n` priced packages for one course, spread uniformly over a year starting
/// at `start`. Used for price-model demonstrations.
pub fn generate_course_packages(
    gt: &PricingGroundTruth,
    course_id: CourseId,
    n: usize,
    start: NaiveDate,
    seed: u64,
) -> Vec<Package> {
    let cfg = GeneratorConfig::default();
    let calendar = holiday_calendar(start, start + Duration::days(500));
    let factory = PackageFactory { cfg: &cfg, calendar: &calendar };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let from = start + Duration::days(rng.random_range(0..365));
            let mut p = factory.draw(PackageId(i as u32 + 1), course_id, from, &mut rng);
            p.price = ground_truth_price(&p, gt, &mut rng);
            p
        })
        .collect()
}

/// Generates a full dataset, its pricing ground truth and planted labels.
/// Deterministic in `cfg` (including `cfg.seed`).
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Generated> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = cfg.start;
    let end = cfg.end();
    let calendar = holiday_calendar(start, end);

    // Courses and their price levels.
    let rating_noise = Normal::new(3.6, 0.5).expect("valid normal");
    let level_noise = LogNormal::new(0.0, cfg.course_level_spread).expect("valid lognormal");
    let mut courses = Vec::with_capacity(cfg.n_courses);
    let mut course_levels = BTreeMap::new();
    for i in 0..cfg.n_courses {
        let id = CourseId(i as u32 + 1);
        let rating: f64 = (rating_noise.sample(&mut rng) * 10.0_f64).round().clamp(10.0, 50.0) / 10.0;
        let level = (level_noise.sample(&mut rng) * (1.0 + 0.15 * (rating - 3.6))).clamp(0.6, 1.8);
        courses.push(Course { id, rating, region: (i % cfg.n_regions) as u32 });
        course_levels.insert(id, level);
    }

    let gt = PricingGroundTruth {
        base_price: cfg.base_price,
        feature_names: main_effect_names(),
        coefficients: cfg.price_coefficients.clone(),
        seasonal_index: cfg.seasonal_index,
        course_levels,
        noise_sd: cfg.price_noise_sd,
        min_price: cfg.min_price,
    };

    // Packages: every course gets a batch each month.
    let factory = PackageFactory { cfg, calendar: &calendar };
    let mut packages = Vec::new();
    let mut by_course: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_courses];
    for first in month_starts(start, end) {
        let len = days_in_month(first);
        for (ci, course) in courses.iter().enumerate() {
            for _ in 0..cfg.n_packages_per_course_month {
                let from = first + Duration::days(rng.random_range(0..len));
                if from > end {
                    continue;
                }
                let id = PackageId(packages.len() as u32 + 1);
                let mut p = factory.draw(id, course.id, from, &mut rng);
                p.price = ground_truth_price(&p, &gt, &mut rng);
                by_course[ci].push(packages.len());
                packages.push(p);
            }
        }
    }

    let levels: Vec<f64> = courses.iter().map(|c| gt.course_levels[&c.id]).collect();
    let coef = |name: &str| {
        let i = gt.feature_names.iter().position(|n| n == name).expect("known feature");
        gt.coefficients[i]
    };
    // Price premium per option flag, holiday priced as the mean weekend term.
    let flag_premium = [
        coef("lunch"),
        coef("caddie"),
        coef("competition"),
        (coef("dow_6") + coef("dow_7")) / 2.0,
        coef("pair_party"),
    ];
    let mut region_courses: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_regions];
    for (ci, c) in courses.iter().enumerate() {
        region_courses[c.region as usize].push(ci);
    }

    let mix = WeightedIndex::new(&cfg.cluster_mix).map_err(|e| Error::config("cluster_mix", e.to_string()))?;
    let span_days = (end - start).num_days() + 1;
    let years = span_days as f64 / 365.25;
    let poisson = Poisson::new(cfg.bookings_per_user_year * years)
        .map_err(|e| Error::config("bookings_per_user_year", e.to_string()))?;
    let gumbel = Gumbel::new(0.0, 1.0).expect("valid gumbel");

    let mut bookings = Vec::new();
    let mut labels = BTreeMap::new();
    for u in 0..cfg.n_users {
        let user_id = UserId(u as u32 + 1);
        let archetype = mix.sample(&mut rng);
        let arch = &cfg.archetypes[archetype];
        labels.insert(user_id, archetype);

        let mut rates = arch.option_rates;
        for r in &mut rates {
            *r = (*r + 0.06 * rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(0.02, 0.98);
        }
        let budget = arch.budget
            * LogNormal::new(0.0, arch.budget_spread.max(1e-9))
                .expect("valid lognormal")
                .sample(&mut rng);
        let home_region = rng.random_range(0..cfg.n_regions);
        // Noise-free price of the user's preferred bundle, per unit course level.
        let bundle = cfg.base_price as f64
            + rates.iter().zip(flag_premium).map(|(r, c)| r * c).sum::<f64>();
        let affinity = |ci: usize, target: f64| {
            let fit = (levels[ci] * bundle / target).ln() / 0.2;
            let mut w = (-0.5 * fit * fit).exp();
            if arch.rating_preference > 0.0 {
                let d = courses[ci].rating - arch.rating_preference;
                w *= (-d * d).exp();
            }
            w.max(1e-6)
        };
        let home = &region_courses[home_region];
        let mut favorites = Vec::new();
        let mut pool: Vec<usize> = home.clone();
        while favorites.len() < 3 && !pool.is_empty() {
            let weights: Vec<f64> = pool.iter().map(|&ci| affinity(ci, budget)).collect();
            let k = WeightedIndex::new(&weights).expect("positive weights").sample(&mut rng);
            favorites.push(courses[pool.remove(k)].id);
        }
        let profile = UserProfile {
            archetype,
            rates,
            budget,
            home_region,
            favored_month: rng.random_range(1..=12),
            favorites,
            party_size: pick(&arch.party_sizes, &mut rng),
            num_parties: pick(&arch.num_parties, &mut rng),
        };

        let n = poisson.sample(&mut rng) as usize;
        for _ in 0..n {
            if let Some(b) = simulate_booking(
                cfg,
                &profile,
                user_id,
                &courses,
                &region_courses,
                &packages,
                &by_course,
                &calendar,
                span_days,
                &affinity,
                &gumbel,
                &mut rng,
            ) {
                bookings.push(b);
            }
        }
    }

    let mut dataset = Dataset {
        courses,
        packages,
        bookings,
        holiday_calendar: calendar,
    };
    dataset.sort_bookings();
    Ok(Generated {
        dataset,
        ground_truth: gt,
        labels,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_booking(
    cfg: &GeneratorConfig,
    user: &UserProfile,
    user_id: UserId,
    courses: &[Course],
    region_courses: &[Vec<usize>],
    packages: &[Package],
    by_course: &[Vec<usize>],
    calendar: &BTreeSet<NaiveDate>,
    span_days: i64,
    affinity: &dyn Fn(usize, f64) -> f64,
    gumbel: &Gumbel<f64>,
    rng: &mut ChaCha8Rng,
) -> Option<Booking> {
    let arch = &cfg.archetypes[user.archetype];
    // Anchor date, biased toward the favored season.
    let anchor = loop {
        let d = cfg.start + Duration::days(rng.random_range(0..span_days));
        let dist = crate::reference::circular_month_distance(d.month(), user.favored_month);
        if rng.random::<f64>() < 0.25 + 0.75 * crate::reference::month_kernel(dist) {
            break d;
        }
    };
    let week_end = (anchor + Duration::days(6)).min(cfg.end());
    let month = anchor.month();
    let season = cfg.seasonal_index[month as usize - 1];
    let dispersed = arch.spend_dispersion > 0.0;
    let target = if dispersed {
        user.budget * season * LogNormal::new(0.0, arch.spend_dispersion).expect("valid").sample(rng)
    } else {
        user.budget * season
    };
    let party_size = user.party_size;
    let num_parties = if arch.party_jitter > 0.0 && rng.random_bool(arch.party_jitter) {
        user.num_parties.saturating_add(1)
    } else {
        user.num_parties
    };

    let home = &region_courses[user.home_region];
    let home_weights: Vec<f64> = home.iter().map(|&ci| affinity(ci, target / season)).collect();
    let home_dist = WeightedIndex::new(&home_weights).ok()?;
    let draw_course = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random();
        // Dispersed spenders shop for a course matching this booking's
        // target rather than returning to their usual courses.
        if u < 0.65 && !user.favorites.is_empty() && !dispersed {
            let id = user.favorites[rng.random_range(0..user.favorites.len())];
            id.0 as usize - 1
        } else if u < 0.93 {
            home[home_dist.sample(rng)]
        } else {
            rng.random_range(0..courses.len())
        }
    };
    for _attempt in 0..8 {
        let mut considered: Vec<usize> = (0..cfg.courses_considered).map(|_| draw_course(rng)).collect();
        considered.sort_unstable();
        considered.dedup();
        let candidates: Vec<&Package> = considered
            .iter()
            .flat_map(|&ci| by_course[ci].iter())
            .map(|&i| &packages[i])
            .filter(|p| p.is_active_during(anchor, week_end))
            .filter(|p| p.options.min_party_size <= party_size && p.options.min_num_parties <= num_parties)
            .filter(|p| (p.price as f64 - target).abs() <= cfg.spend_band * target)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let chosen = candidates
            .iter()
            .map(|p| {
                let ll: f64 = OptionFlag::ALL
                    .iter()
                    .map(|&k| {
                        let r = user.rates[k.index()];
                        if p.options.flag(k) { r.ln() } else { (1.0 - r).ln() }
                    })
                    .sum();
                let gap = (p.price as f64 - target).abs() / target;
                let utility = cfg.option_weight * ll - cfg.price_weight * gap + gumbel.sample(rng);
                (utility, *p)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.id.cmp(&a.1.id)))
            .map(|(_, p)| p)?;

        let lo = anchor.max(chosen.active_from);
        let hi = week_end.min(chosen.active_to);
        let days: Vec<NaiveDate> = (0..=(hi - lo).num_days()).map(|i| lo + Duration::days(i)).collect();
        let matches_kind = |d: &NaiveDate| is_holiday(*d, calendar) == chosen.options.holiday;
        let exact: Vec<&NaiveDate> = days
            .iter()
            .filter(|d| matches_kind(d) && (chosen.options.holiday || d.weekday().number_from_monday() == chosen.play_dow))
            .collect();
        let kind: Vec<&NaiveDate> = days.iter().filter(|d| matches_kind(d)).collect();
        let play_date = if !exact.is_empty() {
            *exact[rng.random_range(0..exact.len())]
        } else if !kind.is_empty() {
            *kind[rng.random_range(0..kind.len())]
        } else {
            days[0]
        };
        let lead = rng.random_range(0..=3);
        let booked_at = (play_date - Duration::days(lead)).max(cfg.start);
        return Some(Booking {
            user_id,
            course_id: chosen.course_id,
            package_id: chosen.id,
            booked_at,
            play_date,
            price_paid: chosen.price,
            options: chosen.options,
            party_size,
            num_parties,
        });
    }
    None
}

/// Fraction of users whose every booking price lies within `band` (relative)
/// of their own mean spend.
pub fn spend_adherence(dataset: &Dataset, band: f64) -> f64 {
    let histories = dataset.histories();
    if histories.is_empty() {
        return 0.0;
    }
    let within = histories
        .values()
        .filter(|h| {
            let mean = h.iter().map(|b| b.price_paid as f64).sum::<f64>() / h.len() as f64;
            h.iter().all(|b| (b.price_paid as f64 - mean).abs() <= band * mean)
        })
        .count();
    within as f64 / histories.len() as f64
}

/// Fraction of packages whose lifespan is at most `days`.
pub fn lifespan_fraction_within(dataset: &Dataset, days: i64) -> f64 {
    if dataset.packages.is_empty() {
        return 0.0;
    }
    dataset.packages.iter().filter(|p| p.shortness <= days).count() as f64 / dataset.packages.len() as f64
}
