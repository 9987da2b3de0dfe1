#![allow(dead_code)]

use chrono::NaiveDate;
use coldpack::domain::{Booking, Catalog, Dataset};
use coldpack::ranker::{ModelConfig, TrainedRecommender};
use coldpack::synthgen::{generate_dataset, GeneratorConfig, Generated};

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn cutoff() -> NaiveDate {
    date(2013, 5, 31)
}

/// A few hundred users over a small catalog: fast, but with every archetype.
pub fn small_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_users: 600,
        n_courses: 24,
        n_regions: 4,
        n_packages_per_course_month: 4,
        seed,
        ..GeneratorConfig::default()
    }
}

pub fn small(seed: u64) -> Generated {
    generate_dataset(&small_config(seed)).unwrap()
}

pub fn train_side(d: &Dataset, as_of: NaiveDate) -> Vec<Booking> {
    d.bookings.iter().filter(|b| b.booked_at <= as_of).cloned().collect()
}

pub fn fit(d: &Dataset, as_of: NaiveDate) -> TrainedRecommender {
    let catalog = Catalog::from_dataset(d);
    TrainedRecommender::fit(&train_side(d, as_of), &catalog, as_of, &ModelConfig::default()).unwrap()
}
