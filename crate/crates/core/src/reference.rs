//! Reference course and package selection.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::{Booking, CourseId, PackageId};
use crate::error::{Error, Result};

/// Scores closer than this are treated as tied.
const SCORE_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSelection {
    pub course_id: CourseId,
    pub package_id: PackageId,
    pub score: f64,
    pub selected_at: NaiveDate,
}

/// Distance between two months on the 12-month circle, in `0..=6`.
pub fn circular_month_distance(a: u32, b: u32) -> u32 {
    let d = a.abs_diff(b) % 12;
    d.min(12 - d)
}

/// `(1 + cos(pi * d / 6)) / 2`: 1 at distance 0, 0 at distance 6.
pub fn month_kernel(distance: u32) -> f64 {
    (1.0 + (PI * distance as f64 / 6.0).cos()) / 2.0
}

/// Seasonal affinity of a course: kernel-weighted count of its bookings by
/// play month.
pub fn seasonal_course_score<'a>(
    bookings: impl IntoIterator<Item = &'a Booking>,
    target_month: u32,
) -> f64 {
    bookings
        .into_iter()
        .map(|b| month_kernel(circular_month_distance(b.play_date.month(), target_month)))
        .sum()
}

/// Seasonal score of every course in the history.
pub fn course_scores(history: &[Booking], target_month: u32) -> BTreeMap<CourseId, f64> {
    let mut by_course: BTreeMap<CourseId, Vec<&Booking>> = BTreeMap::new();
    for b in history {
        by_course.entry(b.course_id).or_default().push(b);
    }
    by_course
        .into_iter()
        .map(|(c, bs)| (c, seasonal_course_score(bs, target_month)))
        .collect()
}

/// Course with the highest seasonal score (ties: most recent booking, then
/// lowest course id), and that course's most recently booked package (ties:
/// lowest package id).
pub fn select_reference(history: &[Booking], target_date: NaiveDate) -> Result<ReferenceSelection> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let scores = course_scores(history, target_date.month());
    let last_booked = |c: CourseId| {
        history
            .iter()
            .filter(|b| b.course_id == c)
            .map(|b| b.booked_at)
            .max()
    };
    let mut best: Option<(CourseId, f64)> = None;
    for (&course, &score) in &scores {
        best = match best {
            None => Some((course, score)),
            Some((bc, bs)) => {
                let better = if (score - bs).abs() <= SCORE_TIE_EPS {
                    // Iteration is in ascending id order, so equal recency keeps
                    // the lower id.
                    last_booked(course) > last_booked(bc)
                } else {
                    score > bs
                };
                if better {
                    Some((course, score))
                } else {
                    Some((bc, bs))
                }
            }
        };
    }
    let (course_id, score) = best.expect("non-empty history has a course");
    let package = history
        .iter()
        .filter(|b| b.course_id == course_id)
        .max_by(|a, b| {
            a.booked_at
                .cmp(&b.booked_at)
                .then(b.package_id.cmp(&a.package_id))
        })
        .expect("selected course has bookings");
    Ok(ReferenceSelection {
        course_id,
        package_id: package.package_id,
        score,
        selected_at: target_date,
    })
}
