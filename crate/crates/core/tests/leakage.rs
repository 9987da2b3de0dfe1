//! Canary: scrambling everything after the cutoff must leave every trained
//! artifact and the tuned weights byte-identical.

mod common;

use chrono::Duration;
use coldpack::domain::{Catalog, CourseId, Dataset, PackageId};
use coldpack::evalharness::{temporal_split, tune_settings};
use coldpack::ranker::{HillClimbConfig, ModelConfig, Setting, TrainedRecommender};
use coldpack::store::artifact_bytes;

use common::*;

fn artifacts(d: &Dataset) -> Vec<(&'static str, Vec<u8>)> {
    let split = temporal_split(&d.bookings, cutoff(), 15).unwrap();
    let catalog = Catalog::from_dataset(d);
    let model = TrainedRecommender::fit(&split.train, &catalog, cutoff(), &ModelConfig::default()).unwrap();
    artifact_bytes(&model).unwrap()
}

fn tuned(d: &Dataset) -> String {
    let catalog = Catalog::from_dataset(d);
    let hill = HillClimbConfig {
        max_rounds: 20,
        ..HillClimbConfig::default()
    };
    let (r, users) = tune_settings(
        &d.bookings,
        &catalog,
        cutoff(),
        15,
        &Setting::ALL,
        &ModelConfig::default(),
        &hill,
    )
    .unwrap();
    let weights: Vec<_> = r.values().map(|x| (x.weights, x.emp)).collect();
    format!("{users} {weights:?}")
}

fn scramble_future(d: &Dataset) -> Dataset {
    let mut out = d.clone();
    let n_courses = d.courses.len() as u32;
    for (i, b) in out.bookings.iter_mut().enumerate() {
        if b.booked_at > cutoff() {
            b.price_paid = b.price_paid * 3 + 17;
            b.course_id = CourseId((b.course_id.0 + 1 + i as u32) % n_courses + 1);
            b.package_id = PackageId(b.package_id.0 ^ 0x5a5a);
            b.options.caddie = !b.options.caddie;
            b.party_size = 1;
        }
    }
    let extra = out.bookings.iter().find(|b| b.booked_at > cutoff()).cloned().unwrap();
    for k in 0..50 {
        let mut b = extra.clone();
        b.booked_at = cutoff() + Duration::days(1 + k % 20);
        b.user_id.0 += 100_000 + k as u32;
        out.bookings.push(b);
    }
    for p in out.packages.iter_mut() {
        if p.active_from > cutoff() {
            p.price = p.price * 2 + 999;
        }
    }
    out.sort_bookings();
    out
}

#[test]
fn future_data_cannot_reach_trained_artifacts() {
    let g = small(21);
    let base = artifacts(&g.dataset);
    let scrambled = scramble_future(&g.dataset);
    assert_ne!(scrambled.bookings, g.dataset.bookings);
    let after = artifacts(&scrambled);
    assert_eq!(base.len(), 5);
    for ((name, a), (_, b)) in base.iter().zip(&after) {
        assert!(a == b, "{name} changed after perturbing the test window");
    }
}

#[test]
fn future_data_cannot_reach_tuned_weights() {
    let g = small(22);
    assert_eq!(tuned(&g.dataset), tuned(&scramble_future(&g.dataset)));
}

#[test]
fn canary_is_sensitive_to_training_data() {
    let g = small(21);
    let mut d = g.dataset.clone();
    let b = d.bookings.iter_mut().find(|b| b.booked_at <= cutoff()).unwrap();
    b.price_paid += 5_000;
    assert_ne!(artifacts(&g.dataset), artifacts(&d));
}
