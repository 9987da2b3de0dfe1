//! Per-user behavior vectors, z-score standardization and Euclidean k-means
//! segmentation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Booking, Catalog, UserId};
use crate::error::{Error, Result};
use crate::stats;

/// Number of clustering dimensions in a [`UserVector`].
pub const USER_DIMS: usize = 11;

/// Dimension names in coordinate order; this is the coordinate system of the
/// logistic option models.
pub const USER_DIM_NAMES: [&str; USER_DIMS] = [
    "lunch_rate",
    "competition_rate",
    "holiday_rate",
    "caddie_rate",
    "avg_spending",
    "std_spending",
    "avg_course_rating",
    "std_course_rating",
    "avg_num_parties",
    "std_num_parties",
    "avg_party_size",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserVector {
    pub lunch_rate: f64,
    pub competition_rate: f64,
    pub holiday_rate: f64,
    pub caddie_rate: f64,
    pub avg_spending: f64,
    /// Also the user's spending deviation used by price similarity.
    pub std_spending: f64,
    pub avg_course_rating: f64,
    pub std_course_rating: f64,
    pub avg_num_parties: f64,
    pub std_num_parties: f64,
    pub avg_party_size: f64,
    pub n_bookings: usize,
}

impl UserVector {
    pub fn to_array(&self) -> [f64; USER_DIMS] {
        [
            self.lunch_rate,
            self.competition_rate,
            self.holiday_rate,
            self.caddie_rate,
            self.avg_spending,
            self.std_spending,
            self.avg_course_rating,
            self.std_course_rating,
            self.avg_num_parties,
            self.std_num_parties,
            self.avg_party_size,
        ]
    }
}

/// Population mean and sd of the prices paid over a history.
pub fn spending_stats<'a>(history: impl IntoIterator<Item = &'a Booking>) -> Result<(f64, f64)> {
    let prices: Vec<f64> = history.into_iter().map(|b| b.price_paid as f64).collect();
    if prices.is_empty() {
        return Err(Error::EmptyHistory);
    }
    Ok(stats::mean_sd(&prices))
}

/// Aggregates one user's bookings. Course ratings are looked up in
/// `catalog`; bookings on unknown courses are rejected.
pub fn build_user_vector(history: &[Booking], catalog: &Catalog) -> Result<UserVector> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let n = history.len() as f64;
    let rate = |f: fn(&Booking) -> bool| history.iter().filter(|b| f(b)).count() as f64 / n;
    let (avg_spending, std_spending) = spending_stats(history)?;
    let ratings = history
        .iter()
        .map(|b| {
            catalog
                .course(b.course_id)
                .map(|c| c.rating)
                .ok_or_else(|| Error::InvalidInput(format!("unknown course {}", b.course_id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let parties: Vec<f64> = history.iter().map(|b| b.num_parties as f64).collect();
    let sizes: Vec<f64> = history.iter().map(|b| b.party_size as f64).collect();
    let (avg_course_rating, std_course_rating) = stats::mean_sd(&ratings);
    let (avg_num_parties, std_num_parties) = stats::mean_sd(&parties);
    Ok(UserVector {
        lunch_rate: rate(|b| b.options.lunch),
        competition_rate: rate(|b| b.options.competition),
        holiday_rate: rate(|b| b.options.holiday),
        caddie_rate: rate(|b| b.options.caddie),
        avg_spending,
        std_spending,
        avg_course_rating,
        std_course_rating,
        avg_num_parties,
        std_num_parties,
        avg_party_size: stats::mean(&sizes),
        n_bookings: history.len(),
    })
}

/// Per-dimension z-transform. Constant dimensions keep sd = 1 so they map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(vectors: &[Vec<f64>]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::InvalidInput(
                "standardizer needs at least two vectors".into(),
            ));
        }
        let dims = vectors[0].len();
        let mut mean = Vec::with_capacity(dims);
        let mut sd = Vec::with_capacity(dims);
        for d in 0..dims {
            let column = vectors
                .iter()
                .map(|v| {
                    v.get(d).copied().ok_or(Error::DimensionMismatch {
                        expected: dims,
                        actual: v.len(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let (m, s) = stats::mean_sd(&column);
            mean.push(m);
            sd.push(if s > 0.0 { s } else { 1.0 });
        }
        Ok(Self { mean, sd })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 5,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster id per input vector, in input order.
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step, first entry from the seeding.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; ties go to the lowest cluster id.
pub fn nearest_centroid(v: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(v, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn assign_cluster(v: &[f64], clustering: &Clustering) -> usize {
    nearest_centroid(v, &clustering.centroids).0
}

fn assign_all(points: &[&[f64]], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (c, d) = nearest_centroid(p, centroids);
            inertia += d;
            c
        })
        .collect();
    (labels, inertia)
}

fn kmeans_plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centroid.
            rng.random_range(0..points.len())
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in dist.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        };
        let c = points[next].to_vec();
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Lloyd's algorithm from k-means++ seeding. Input is processed in a
/// canonical (lexicographic) order, so permuting the input permutes the
/// assignment and nothing else.
fn centroids_of(points: &[&[f64]], labels: &[usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dims = previous[0].len();
    let mut sums = vec![vec![0.0; dims]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((sum, n), prev)| {
            if n > 0 {
                sum.iter().map(|s| s / n as f64).collect()
            } else {
                prev.clone()
            }
        })
        .collect()
}

/// One sweep of single-point reassignments that lower the inertia, using
/// the exact change including centroid shifts. Returns whether any point moved.
fn hartigan_pass(points: &[&[f64]], labels: &mut [usize], k: usize) -> bool {
    let dims = points[0].len();
    let mut sums = vec![vec![0.0; dims]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels.iter()) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    let centroid = |sum: &[f64], n: usize| -> Vec<f64> { sum.iter().map(|s| s / n as f64).collect() };
    let mut moved = false;
    for (i, p) in points.iter().enumerate() {
        let a = labels[i];
        if counts[a] < 2 {
            continue;
        }
        let na = counts[a] as f64;
        let removal = na / (na - 1.0) * squared_distance(p, &centroid(&sums[a], counts[a]));
        let mut best: Option<(usize, f64)> = None;
        for b in (0..k).filter(|&b| b != a) {
            let nb = counts[b] as f64;
            let addition = if counts[b] == 0 {
                0.0
            } else {
                nb / (nb + 1.0) * squared_distance(p, &centroid(&sums[b], counts[b]))
            };
            let gain = removal - addition;
            // Relative margin keeps rounding noise from cycling points.
            if gain > 1e-12 * removal.max(1.0) && best.is_none_or(|(_, g)| gain > g) {
                best = Some((b, gain));
            }
        }
        if let Some((b, _)) = best {
            for (d, x) in p.iter().enumerate() {
                sums[a][d] -= x;
                sums[b][d] += x;
            }
            counts[a] -= 1;
            counts[b] += 1;
            labels[i] = b;
            moved = true;
        }
    }
    moved
}

pub fn kmeans(points: &[Vec<f64>], cfg: &KMeansConfig, seed: u64) -> Result<Clustering> {
    let k = cfg.k;
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds the number of vectors ({})",
            points.len()
        )));
    }
    let dims = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dims) {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: bad.len(),
        });
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lexicographic(&points[a], &points[b]).then(a.cmp(&b)));
    let sorted: Vec<&[f64]> = order.iter().map(|&i| points[i].as_slice()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&sorted, k, &mut rng);
    let (mut labels, mut inertia) = assign_all(&sorted, &centroids);
    let mut trace = vec![inertia];
    let mut iterations = 0;

    loop {
        while iterations < cfg.max_iter {
            iterations += 1;
            let mut sums = vec![vec![0.0; dims]; k];
            let mut counts = vec![0usize; k];
            for (p, &l) in sorted.iter().zip(&labels) {
                counts[l] += 1;
                for (s, x) in sums[l].iter_mut().zip(p.iter()) {
                    *s += x;
                }
            }
            for (c, (sum, &count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
                // Empty clusters keep their previous centroid.
                if count > 0 {
                    *c = sum.iter().map(|s| s / count as f64).collect();
                }
            }
            let (new_labels, new_inertia) = assign_all(&sorted, &centroids);
            trace.push(new_inertia);
            let unchanged = new_labels == labels;
            let rel_change = if inertia > 0.0 {
                (inertia - new_inertia).abs() / inertia
            } else {
                0.0
            };
            labels = new_labels;
            inertia = new_inertia;
            if unchanged || rel_change < cfg.tol {
                break;
            }
        }
        // Lloyd stops at any fixed point; single-point moves escape some of
        // the poor ones.
        if iterations >= cfg.max_iter || !hartigan_pass(&sorted, &mut labels, k) {
            break;
        }
        centroids = centroids_of(&sorted, &labels, &centroids);
        let (new_labels, new_inertia) = assign_all(&sorted, &centroids);
        labels = new_labels;
        inertia = new_inertia;
        trace.push(inertia);
    }

    let mut assignment = vec![0; points.len()];
    for (pos, &orig) in order.iter().enumerate() {
        assignment[orig] = labels[pos];
    }
    Ok(Clustering {
        k,
        centroids,
        assignment,
        inertia,
        inertia_trace: trace,
        iterations,
    })
}

/// Best of several seeded k-means runs (lowest inertia, first seed on ties).
pub fn kmeans_restarts(
    points: &[Vec<f64>],
    cfg: &KMeansConfig,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<Clustering> {
    let mut best: Option<Clustering> = None;
    for seed in seeds {
        let c = kmeans(points, cfg, seed)?;
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no k-means seeds given".into()))
}

/// Fitted segmentation of a user population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSegmentation {
    pub standardizer: Standardizer,
    pub clustering: Clustering,
    /// Users that entered the clustering fit, in id order (aligned with
    /// `clustering.assignment`).
    pub fitted_users: Vec<UserId>,
    /// Cluster of every user with history, fitted or assigned post hoc.
    pub clusters: BTreeMap<UserId, usize>,
}

impl UserSegmentation {
    pub fn cluster_of(&self, user: UserId) -> Option<usize> {
        self.clusters.get(&user).copied()
    }
}

/// Users with at least two distinct booked courses enter the fit; everyone
/// else is assigned to the nearest centroid afterwards.
pub fn is_clustering_eligible(history: &[Booking]) -> bool {
    let courses: BTreeSet<_> = history.iter().map(|b| b.course_id).collect();
    courses.len() >= 2
}

/// Builds vectors for every user, fits the standardizer and k-means on the
/// eligible users, then assigns the rest.
pub fn segment_users(
    vectors: &BTreeMap<UserId, UserVector>,
    eligible: &BTreeSet<UserId>,
    cfg: &KMeansConfig,
    seeds: &[u64],
) -> Result<UserSegmentation> {
    let fitted_users: Vec<UserId> = vectors
        .keys()
        .copied()
        .filter(|u| eligible.contains(u))
        .collect();
    let raw: Vec<Vec<f64>> = fitted_users
        .iter()
        .map(|u| vectors[u].to_array().to_vec())
        .collect();
    let standardizer = Standardizer::fit(&raw)?;
    let standardized = raw
        .iter()
        .map(|v| standardizer.apply(v))
        .collect::<Result<Vec<_>>>()?;
    let clustering = kmeans_restarts(&standardized, cfg, seeds.iter().copied())?;
    let mut clusters: BTreeMap<UserId, usize> = fitted_users
        .iter()
        .copied()
        .zip(clustering.assignment.iter().copied())
        .collect();
    for (user, v) in vectors {
        if !clusters.contains_key(user) {
            let std = standardizer.apply(&v.to_array())?;
            clusters.insert(*user, assign_cluster(&std, &clustering));
        }
    }
    Ok(UserSegmentation {
        standardizer,
        clustering,
        fitted_users,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Course, CourseId, OptionVector, PackageId};
    use chrono::NaiveDate;
    use rand::Rng;

    fn catalog() -> Catalog {
        let courses = [(1, 3.0), (2, 4.0), (3, 4.5)]
            .map(|(id, rating)| Course {
                id: CourseId(id),
                rating,
                region: 0,
            })
            .to_vec();
        Catalog::new(&courses, &[])
    }

    #[allow(clippy::too_many_arguments)]
    fn booking(
        course: u32,
        price: i64,
        lunch: bool,
        caddie: bool,
        competition: bool,
        holiday: bool,
        size: u8,
        parties: u8,
    ) -> Booking {
        let d = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
        Booking {
            user_id: UserId(1),
            course_id: CourseId(course),
            package_id: PackageId(course),
            booked_at: d,
            play_date: d,
            price_paid: price,
            options: OptionVector {
                lunch,
                caddie,
                competition,
                holiday,
                ..OptionVector::default()
            },
            party_size: size,
            num_parties: parties,
        }
    }

    #[test]
    fn two_bookings_rates_and_spending() {
        let h = vec![
            booking(1, 8000, true, false, false, false, 2, 1),
            booking(2, 12000, false, false, false, false, 2, 1),
        ];
        let v = build_user_vector(&h, &catalog()).unwrap();
        assert_eq!(v.lunch_rate, 0.5);
        assert_eq!(v.avg_spending, 10000.0);
        assert_eq!(v.std_spending, 2000.0);
        assert_eq!(v.n_bookings, 2);
    }

    #[test]
    fn four_booking_fixture_matches_hand_recomputation() {
        let h = vec![
            booking(1, 9000, true, false, true, true, 4, 2),
            booking(2, 11000, true, true, false, true, 4, 3),
            booking(3, 15000, false, true, false, false, 3, 1),
            booking(1, 9000, true, false, false, true, 4, 2),
        ];
        let v = build_user_vector(&h, &catalog()).unwrap();
        // Spreadsheet-style recomputation of every column.
        let spend_mean = (9000.0 + 11000.0 + 15000.0 + 9000.0) / 4.0;
        let spend_var = [9000.0f64, 11000.0, 15000.0, 9000.0]
            .iter()
            .map(|x| (x - spend_mean).powi(2))
            .sum::<f64>()
            / 4.0;
        let rating_mean = (3.0 + 4.0 + 4.5 + 3.0) / 4.0;
        let rating_var = [3.0f64, 4.0, 4.5, 3.0]
            .iter()
            .map(|x| (x - rating_mean).powi(2))
            .sum::<f64>()
            / 4.0;
        let parties_mean = (2.0 + 3.0 + 1.0 + 2.0) / 4.0;
        let parties_var = [2.0f64, 3.0, 1.0, 2.0]
            .iter()
            .map(|x| (x - parties_mean).powi(2))
            .sum::<f64>()
            / 4.0;
        let expected = [
            0.75,
            0.25,
            0.75,
            0.5,
            spend_mean,
            spend_var.sqrt(),
            rating_mean,
            rating_var.sqrt(),
            parties_mean,
            parties_var.sqrt(),
            3.75,
        ];
        for (got, want) in v.to_array().iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn single_booking_has_zero_deviations() {
        let v = build_user_vector(&[booking(2, 9000, true, true, true, true, 2, 1)], &catalog())
            .unwrap();
        assert_eq!(v.std_spending, 0.0);
        assert_eq!(v.std_course_rating, 0.0);
        assert_eq!(v.std_num_parties, 0.0);
    }

    #[test]
    fn empty_history_rejected() {
        assert!(matches!(
            build_user_vector(&[], &catalog()),
            Err(Error::EmptyHistory)
        ));
    }

    #[test]
    fn standardizer_basic_and_constant_dimension() {
        let s = Standardizer::fit(&[vec![0.0, 7.0], vec![2.0, 7.0]]).unwrap();
        assert_eq!(s.mean, vec![1.0, 7.0]);
        assert_eq!(s.sd, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[0.0, 7.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(s.apply(&[2.0, 7.0]).unwrap(), vec![1.0, 0.0]);
        assert!(Standardizer::fit(&[vec![1.0]]).is_err());
        assert!(s.apply(&[1.0]).is_err());
    }

    #[test]
    fn standardized_random_matrix_has_zero_means_unit_sds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                (0..USER_DIMS)
                    .map(|d| rng.random::<f64>() * (d as f64 + 1.0) * 100.0 + d as f64)
                    .collect()
            })
            .collect();
        let s = Standardizer::fit(&rows).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r).unwrap()).collect();
        for d in 0..USER_DIMS {
            let col: Vec<f64> = z.iter().map(|r| r[d]).collect();
            let (m, sd) = stats::mean_sd(&col);
            assert!(m.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    /// Exhaustive optimum over all two-way partitions (both parts non-empty).
    fn best_two_partition(points: &[Vec<f64>]) -> f64 {
        let n = points.len();
        let sse = |idx: &[usize]| {
            let dims = points[0].len();
            let mut c = vec![0.0; dims];
            for &i in idx {
                for (cd, x) in c.iter_mut().zip(&points[i]) {
                    *cd += x / idx.len() as f64;
                }
            }
            idx.iter()
                .map(|&i| squared_distance(&points[i], &c))
                .sum::<f64>()
        };
        (1..(1u32 << (n - 1)))
            .map(|mask| {
                let (a, b): (Vec<usize>, Vec<usize>) =
                    (0..n).partition(|&i| i < n - 1 && mask & (1 << i) != 0);
                sse(&a) + sse(&b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn two_triads_match_exhaustive_optimum() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.2, 0.1],
            vec![0.1, 0.3],
            vec![5.0, 5.0],
            vec![5.2, 4.9],
            vec![4.8, 5.1],
        ];
        let cfg = KMeansConfig {
            k: 2,
            ..KMeansConfig::default()
        };
        let c = kmeans(&pts, &cfg, 3).unwrap();
        assert_eq!(c.assignment[0], c.assignment[1]);
        assert_eq!(c.assignment[0], c.assignment[2]);
        assert_eq!(c.assignment[3], c.assignment[4]);
        assert_eq!(c.assignment[3], c.assignment[5]);
        assert_ne!(c.assignment[0], c.assignment[3]);
        assert!((c.inertia - best_two_partition(&pts)).abs() < 1e-9);
    }

    #[test]
    fn restarts_reach_exhaustive_optimum_on_random_six_point_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = KMeansConfig {
            k: 2,
            ..KMeansConfig::default()
        };
        for _ in 0..200 {
            let dims = rng.random_range(1..=3);
            let pts: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..dims).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let c = kmeans_restarts(&pts, &cfg, 0..10).unwrap();
            assert!((c.inertia - best_two_partition(&pts)).abs() < 1e-9, "{pts:?}");
        }
    }

    #[test]
    fn k_equal_n_gives_zero_inertia() {
        let pts = vec![vec![0.0, 1.0], vec![3.0, 1.0], vec![-2.0, 4.0]];
        let cfg = KMeansConfig {
            k: 3,
            ..KMeansConfig::default()
        };
        let c = kmeans(&pts, &cfg, 9).unwrap();
        assert_eq!(c.inertia, 0.0);
        for (p, &l) in pts.iter().zip(&c.assignment) {
            assert_eq!(&c.centroids[l], p);
        }
    }

    #[test]
    fn k_one_centroid_is_mean() {
        let pts = vec![vec![0.0, 1.0], vec![3.0, 1.0], vec![-2.0, 4.0]];
        let cfg = KMeansConfig {
            k: 1,
            ..KMeansConfig::default()
        };
        let c = kmeans(&pts, &cfg, 1).unwrap();
        assert!((c.centroids[0][0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((c.centroids[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn k_larger_than_n_rejected() {
        let cfg = KMeansConfig {
            k: 3,
            ..KMeansConfig::default()
        };
        assert!(kmeans(&[vec![0.0], vec![1.0]], &cfg, 0).is_err());
    }

    #[test]
    fn assignment_tie_goes_to_lowest_id() {
        let c = Clustering {
            k: 4,
            centroids: vec![vec![-1.0, 0.0], vec![0.0, 5.0], vec![3.0, 3.0], vec![1.0, 0.0]],
            assignment: vec![],
            inertia: 0.0,
            inertia_trace: vec![],
            iterations: 0,
        };
        assert_eq!(assign_cluster(&[3.0, 3.0], &c), 2);
        assert_eq!(assign_cluster(&[0.0, 0.0], &c), 0);
    }

    #[test]
    fn assignment_matches_explicit_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let centroids: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let c = Clustering {
            k: 6,
            centroids: centroids.clone(),
            assignment: vec![],
            inertia: 0.0,
            inertia_trace: vec![],
            iterations: 0,
        };
        for _ in 0..1000 {
            let v: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let dists: Vec<f64> = centroids
                .iter()
                .map(|c| c.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum())
                .collect();
            let mut argmin = 0;
            for i in 1..dists.len() {
                if dists[i] < dists[argmin] {
                    argmin = i;
                }
            }
            assert_eq!(assign_cluster(&v, &c), argmin);
        }
    }

    #[test]
    fn lloyd_inertia_is_monotone_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|i| {
                let centre = (i % 4) as f64 * 3.0;
                vec![
                    centre + rng.random::<f64>() * 2.5,
                    rng.random::<f64>() * 2.5 - centre,
                ]
            })
            .collect();
        let cfg = KMeansConfig {
            k: 4,
            ..KMeansConfig::default()
        };
        let c = kmeans(&pts, &cfg, 8).unwrap();
        for w in c.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        let recomputed: f64 = pts
            .iter()
            .zip(&c.assignment)
            .map(|(p, &l)| squared_distance(p, &c.centroids[l]))
            .sum();
        assert!((recomputed - c.inertia).abs() < 1e-6);
        for (p, &l) in pts.iter().zip(&c.assignment) {
            let (_, d) = nearest_centroid(p, &c.centroids);
            assert!(squared_distance(p, &c.centroids[l]) <= d + 1e-12);
        }
    }

    #[test]
    fn permuting_input_only_permutes_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>()])
            .collect();
        let cfg = KMeansConfig {
            k: 3,
            ..KMeansConfig::default()
        };
        let a = kmeans(&pts, &cfg, 4).unwrap();
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.reverse();
        perm.swap(3, 17);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let b = kmeans(&shuffled, &cfg, 4).unwrap();
        assert_eq!(a.inertia, b.inertia);
        assert_eq!(a.centroids, b.centroids);
        for (pos, &orig) in perm.iter().enumerate() {
            assert_eq!(b.assignment[pos], a.assignment[orig]);
        }
    }
}
