//! Item-item collaborative filtering over parent courses.
//!
//! The co-occurrence matrix counts distinct users: entry `(i, j)` is the
//! number of users who booked both `i` and `j`, the diagonal the number of
//! users who booked `i` at all.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Booking, CourseId, UserId};
use crate::error::{Error, Result};
use crate::io::{read_csv, write_csv};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    courses: Vec<CourseId>,
    index: HashMap<CourseId, usize>,
    counts: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Triplet {
    i: u32,
    j: u32,
    count: u32,
}

impl CooccurrenceMatrix {
    fn empty(mut courses: Vec<CourseId>) -> Self {
        courses.sort();
        courses.dedup();
        let index = courses.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let n = courses.len();
        Self {
            courses,
            index,
            counts: vec![0; n * n],
        }
    }

    /// Matrix over the courses appearing in `bookings`.
    pub fn build(bookings: &[Booking]) -> Self {
        let courses: Vec<CourseId> = bookings.iter().map(|b| b.course_id).collect();
        Self::build_with_courses(courses, bookings)
    }

    /// Matrix over `universe` plus any course appearing in `bookings`.
    pub fn build_with_courses(
        universe: impl IntoIterator<Item = CourseId>,
        bookings: &[Booking],
    ) -> Self {
        let mut per_user: BTreeMap<UserId, BTreeSet<CourseId>> = BTreeMap::new();
        for b in bookings {
            per_user.entry(b.user_id).or_default().insert(b.course_id);
        }
        let mut courses: Vec<CourseId> = universe.into_iter().collect();
        courses.extend(bookings.iter().map(|b| b.course_id));
        let mut m = Self::empty(courses);
        let n = m.courses.len();
        for set in per_user.values() {
            let idx: Vec<usize> = set.iter().map(|c| m.index[c]).collect();
            for &a in &idx {
                for &b in &idx {
                    m.counts[a * n + b] += 1;
                }
            }
        }
        m
    }

    pub fn courses(&self) -> &[CourseId] {
        &self.courses
    }

    pub fn len(&self) -> usize {
        self.courses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.courses.is_empty()
    }

    pub fn contains(&self, c: CourseId) -> bool {
        self.index.contains_key(&c)
    }

    /// Co-count, 0 for unknown courses.
    pub fn get(&self, a: CourseId, b: CourseId) -> u32 {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&i), Some(&j)) => self.counts[i * self.len() + j],
            _ => 0,
        }
    }

    /// Distinct users who booked `c`.
    pub fn popularity(&self, c: CourseId) -> u32 {
        self.get(c, c)
    }

    pub fn cosine(&self, a: CourseId, b: CourseId) -> f64 {
        let denom = (self.popularity(a) as f64 * self.popularity(b) as f64).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            self.get(a, b) as f64 / denom
        }
    }

    /// Fraction of non-zero off-diagonal entries.
    pub fn density(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let nonzero = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.counts[i * n + j] > 0)
            .count();
        nonzero as f64 / (n * (n - 1)) as f64
    }

    fn triplets(&self) -> impl Iterator<Item = Triplet> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (i..n).map(move |j| (i, j))).filter_map(move |(i, j)| {
            let count = self.counts[i * n + j];
            (i == j || count > 0).then(|| Triplet {
                i: self.courses[i].0,
                j: self.courses[j].0,
                count,
            })
        })
    }

    /// Writes the upper triangle (diagonal included) as `i,j,count`; zero
    /// entries are omitted except on the diagonal so every course is listed.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        write_csv(path, self.triplets())
    }

    /// The triplet CSV as bytes, identical to what `write_triplets` writes.
    pub fn triplet_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for t in self.triplets() {
            w.serialize(t)?;
        }
        w.into_inner()
            .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))
    }

    pub fn read_triplets(path: &Path) -> Result<Self> {
        let triplets: Vec<Triplet> = read_csv(path, Ok)?;
        let courses = triplets
            .iter()
            .flat_map(|t| [CourseId(t.i), CourseId(t.j)])
            .collect();
        let mut m = Self::empty(courses);
        let n = m.len();
        for t in triplets {
            let (a, b) = (m.index[&CourseId(t.i)], m.index[&CourseId(t.j)]);
            m.counts[a * n + b] = t.count;
            m.counts[b * n + a] = t.count;
        }
        for a in 0..n {
            for b in 0..n {
                if m.counts[a * n + b] > m.counts[a * n + a].min(m.counts[b * n + b]) {
                    return Err(Error::InvalidInput(format!(
                        "{}: co-count exceeds a diagonal entry",
                        path.display()
                    )));
                }
            }
        }
        Ok(m)
    }
}

/// For every course in the matrix, the mean cosine to the user's distinct
/// booked courses. Empty history yields an empty map.
pub fn course_scores(history: &[Booking], m: &CooccurrenceMatrix) -> BTreeMap<CourseId, f64> {
    let booked: BTreeSet<CourseId> = history.iter().map(|b| b.course_id).collect();
    if booked.is_empty() {
        return BTreeMap::new();
    }
    m.courses()
        .iter()
        .map(|&j| {
            let total: f64 = booked.iter().map(|&i| m.cosine(i, j)).sum();
            (j, total / booked.len() as f64)
        })
        .collect()
}

/// Top `top_m` courses by score (ties: lower id), with `reference` appended
/// when it did not make the cut.
pub fn filter_courses(
    scores: &BTreeMap<CourseId, f64>,
    top_m: usize,
    reference: Option<CourseId>,
) -> Vec<CourseId> {
    let mut ranked: Vec<(CourseId, f64)> = scores.iter().map(|(&c, &s)| (c, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<CourseId> = ranked.into_iter().take(top_m).map(|(c, _)| c).collect();
    if let Some(r) = reference {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}
