//! Seasonal price index, price similarity, and the per-course linear price
//! model over month, weekday, attribute and promotional features.

use serde::{Deserialize, Serialize};

use crate::behavior::spending_stats;
use crate::domain::{Booking, Package, PackageId, PromotionType};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalIndex {
    /// January first.
    pub values: [f64; 12],
}

impl Default for SeasonalIndex {
    fn default() -> Self {
        Self { values: [1.0; 12] }
    }
}

impl SeasonalIndex {
    /// Mean package price per play month divided by the grand mean price.
    /// Months without packages are imputed to 1.
    pub fn fit<'a>(packages: impl IntoIterator<Item = &'a Package>) -> Self {
        let mut sums = [0.0; 12];
        let mut counts = [0usize; 12];
        for p in packages {
            let m = (p.play_month as usize).clamp(1, 12) - 1;
            sums[m] += p.price as f64;
            counts[m] += 1;
        }
        let total: usize = counts.iter().sum();
        let grand = sums.iter().sum::<f64>() / total.max(1) as f64;
        let mut values = [1.0; 12];
        for m in 0..12 {
            if counts[m] > 0 && grand > 0.0 {
                let v = sums[m] / counts[m] as f64 / grand;
                if v > 0.0 {
                    values[m] = v;
                }
            }
        }
        Self { values }
    }

    pub fn get(&self, month: u32) -> f64 {
        self.values[(month as usize).clamp(1, 12) - 1]
    }
}

/// Ratio of the seasonal averages of two months.
pub fn seasonal_ratio(idx: &SeasonalIndex, month_p: u32, month_ref: u32) -> f64 {
    idx.get(month_p) / idx.get(month_ref)
}

/// `1 / (1 + r / (omega + sigma) * |gap|)`.
pub fn price_gap_similarity(gap: f64, sigma_u: f64, omega: f64, r: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::config("omega", "must be positive"));
    }
    if !(sigma_u >= 0.0) {
        return Err(Error::InvalidInput("spending deviation must be >= 0".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidInput("seasonal ratio must be positive".into()));
    }
    Ok(1.0 / (1.0 + r / (omega + sigma_u) * gap.abs()))
}

pub fn price_similarity(p: &Package, p_ref: &Package, sigma_u: f64, omega: f64, r: f64) -> Result<f64> {
    price_gap_similarity((p.price - p_ref.price) as f64, sigma_u, omega, r)
}

/// Population mean and sd of the prices a user paid.
pub fn user_spending_stats(history: &[Booking]) -> Result<(f64, f64)> {
    spending_stats(history)
}

/// Attribute columns (the `A` set), in feature order.
pub const ATTRIBUTE_NAMES: [&str; 7] = [
    "lunch",
    "caddie",
    "competition",
    "pair_party",
    "min_party_size",
    "min_num_parties",
    "num_laps",
];

pub fn attribute_values(p: &Package) -> [f64; 7] {
    let o = &p.options;
    [
        f64::from(u8::from(o.lunch)),
        f64::from(u8::from(o.caddie)),
        f64::from(u8::from(o.competition)),
        f64::from(u8::from(o.pair_party)),
        o.min_party_size as f64,
        o.min_num_parties as f64,
        o.num_laps as f64,
    ]
}

/// Promotional columns (the `P` set): promotion dummies against `none`,
/// then shortness in days.
pub const PROMOTION_NAMES: [&str; 4] = [
    "promo_early_bird",
    "promo_last_minute",
    "promo_limited",
    "shortness",
];

pub fn promotion_values(p: &Package) -> [f64; 4] {
    let is = |t: PromotionType| f64::from(u8::from(p.promotion_type == t));
    [
        is(PromotionType::EarlyBird),
        is(PromotionType::LastMinute),
        is(PromotionType::Limited),
        p.shortness as f64,
    ]
}

/// Month dummies for February..December (January is the baseline).
pub fn month_dummies(p: &Package) -> [f64; 11] {
    let mut out = [0.0; 11];
    if (2..=12).contains(&p.play_month) {
        out[p.play_month as usize - 2] = 1.0;
    }
    out
}

/// Weekday dummies for Tuesday..Sunday (Monday is the baseline).
pub fn weekday_dummies(p: &Package) -> [f64; 6] {
    let mut out = [0.0; 6];
    if (2..=7).contains(&p.play_dow) {
        out[p.play_dow as usize - 2] = 1.0;
    }
    out
}

/// Number of main-effect features (intercept excluded).
pub const MAIN_EFFECTS: usize = 11 + 6 + 7 + 4;

/// Main-effect feature names in [`main_effects`] order.
pub fn main_effect_names() -> Vec<String> {
    (2..=12)
        .map(|m| format!("month_{m}"))
        .chain((2..=7).map(|d| format!("dow_{d}")))
        .chain(ATTRIBUTE_NAMES.iter().map(|s| s.to_string()))
        .chain(PROMOTION_NAMES.iter().map(|s| s.to_string()))
        .collect()
}

pub fn main_effects(p: &Package) -> Vec<f64> {
    let mut out = Vec::with_capacity(MAIN_EFFECTS);
    out.extend(month_dummies(p));
    out.extend(weekday_dummies(p));
    out.extend(attribute_values(p));
    out.extend(promotion_values(p));
    out
}

/// Which part of the month x weekday x attribute x promotion product enters
/// the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceExpansion {
    /// Intercept and main effects.
    MainEffects,
    /// Main effects plus month x attribute and weekday x attribute products.
    Pairwise,
}

impl PriceExpansion {
    pub fn feature_count(self) -> usize {
        1 + MAIN_EFFECTS
            + match self {
                PriceExpansion::MainEffects => 0,
                PriceExpansion::Pairwise => (11 + 6) * 7,
            }
    }

    /// The richest expansion that `n_rows` packages can support.
    pub fn for_rows(n_rows: usize) -> Self {
        if n_rows >= PriceExpansion::Pairwise.feature_count() + 5 {
            PriceExpansion::Pairwise
        } else {
            PriceExpansion::MainEffects
        }
    }

    pub fn names(self) -> Vec<String> {
        let mut out = vec!["intercept".to_string()];
        out.extend(main_effect_names());
        if self == PriceExpansion::Pairwise {
            let periods: Vec<String> = (2..=12)
                .map(|m| format!("month_{m}"))
                .chain((2..=7).map(|d| format!("dow_{d}")))
                .collect();
            for period in &periods {
                for a in ATTRIBUTE_NAMES {
                    out.push(format!("{period}:{a}"));
                }
            }
        }
        out
    }

    pub fn row(self, p: &Package) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_count());
        out.push(1.0);
        out.extend(main_effects(p));
        if self == PriceExpansion::Pairwise {
            let attrs = attribute_values(p);
            for period in month_dummies(p).into_iter().chain(weekday_dummies(p)) {
                out.extend(attrs.iter().map(|a| a * period));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePrediction {
    pub package_id: PackageId,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceModelFit {
    pub expansion: PriceExpansion,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub residual_sd: f64,
    pub max_abs_residual: f64,
    /// Residual sd among the lowest quarter of predicted prices.
    pub residual_sd_bottom_quartile: f64,
    /// Residual sd among the highest quarter of predicted prices.
    pub residual_sd_top_quartile: f64,
    pub predictions: Vec<PricePrediction>,
}

impl PriceModelFit {
    pub fn predict(&self, p: &Package) -> f64 {
        self.expansion
            .row(p)
            .iter()
            .zip(&self.coefficients)
            .map(|(x, b)| x * b)
            .sum()
    }
}

pub const RIDGE_EPSILON: f64 = 1e-8;

/// Solves `a x = b` for symmetric positive definite `a` (row-major, n x n).
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::InvalidInput("normal equations not positive definite".into()));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b)
}

/// Ridge-stabilized least squares of price on the chosen feature expansion.
pub fn fit_price_model(packages: &[Package], expansion: PriceExpansion) -> Result<PriceModelFit> {
    let k = expansion.feature_count();
    if packages.len() < k + 5 {
        return Err(Error::InvalidInput(format!(
            "price model needs at least {} packages, got {}",
            k + 5,
            packages.len()
        )));
    }
    let rows: Vec<Vec<f64>> = packages.iter().map(|p| expansion.row(p)).collect();
    let ys: Vec<f64> = packages.iter().map(|p| p.price as f64).collect();

    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    for (x, y) in rows.iter().zip(&ys) {
        for i in 0..k {
            if x[i] == 0.0 {
                continue;
            }
            xty[i] += x[i] * y;
            for j in 0..k {
                xtx[i * k + j] += x[i] * x[j];
            }
        }
    }
    for i in 0..k {
        xtx[i * k + i] += RIDGE_EPSILON;
    }
    let coefficients = cholesky_solve(xtx, xty, k)?;

    let predictions: Vec<PricePrediction> = packages
        .iter()
        .zip(&rows)
        .map(|(p, x)| PricePrediction {
            package_id: p.id,
            actual: p.price as f64,
            predicted: x.iter().zip(&coefficients).map(|(a, b)| a * b).sum(),
        })
        .collect();
    let residuals: Vec<f64> = predictions.iter().map(|p| p.actual - p.predicted).collect();
    let mean_y = stats::mean(&ys);
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();

    let mut by_pred: Vec<&PricePrediction> = predictions.iter().collect();
    by_pred.sort_by(|a, b| a.predicted.total_cmp(&b.predicted));
    let q = by_pred.len() / 4;
    let quartile_sd = |part: &[&PricePrediction]| {
        let r: Vec<f64> = part.iter().map(|p| p.actual - p.predicted).collect();
        stats::population_sd(&r)
    };

    Ok(PriceModelFit {
        expansion,
        feature_names: expansion.names(),
        coefficients,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        residual_sd: stats::population_sd(&residuals),
        max_abs_residual: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
        residual_sd_bottom_quartile: quartile_sd(&by_pred[..q]),
        residual_sd_top_quartile: quartile_sd(&by_pred[by_pred.len() - q..]),
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CourseId, OptionVector, UserId};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn package(id: u32, month: u32, price: i64) -> Package {
        let d = NaiveDate::from_ymd_opt(2012, month, 1).unwrap();
        Package {
            id: PackageId(id),
            course_id: CourseId(1),
            active_from: d,
            active_to: d,
            play_month: month,
            play_dow: 1,
            options: OptionVector::default(),
            price,
            promotion_type: PromotionType::None,
            shortness: 0,
        }
    }

    #[test]
    fn ratio_basics() {
        let mut idx = SeasonalIndex::default();
        assert_eq!(seasonal_ratio(&idx, 4, 4), 1.0);
        idx.values[5] = 1.2;
        idx.values[11] = 0.8;
        assert!((seasonal_ratio(&idx, 6, 12) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn seasonal_index_fit_and_imputation() {
        let pkgs = vec![package(1, 6, 12_000), package(2, 6, 12_000), package(3, 12, 8_000), package(4, 12, 8_000)];
        let idx = SeasonalIndex::fit(&pkgs);
        assert!((idx.get(6) - 1.2).abs() < 1e-12);
        assert!((idx.get(12) - 0.8).abs() < 1e-12);
        assert_eq!(idx.get(3), 1.0);
    }

    #[test]
    fn similarity_examples() {
        let a = package(1, 6, 10_000);
        assert_eq!(price_similarity(&a, &a, 0.0, 1000.0, 1.0).unwrap(), 1.0);
        let b = package(2, 6, 12_000);
        assert!((price_similarity(&b, &a, 1000.0, 1000.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let low = price_similarity(&b, &a, 100.0, 1000.0, 1.0).unwrap();
        let high = price_similarity(&b, &a, 5000.0, 1000.0, 1.0).unwrap();
        assert!(high > low);
        assert!(price_similarity(&b, &a, 0.0, 0.0, 1.0).is_err());
        assert!(price_similarity(&b, &a, 0.0, -3.0, 1.0).is_err());
    }

    #[test]
    fn spending_stats_examples() {
        let d = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
        let mk = |price| Booking {
            user_id: UserId(1),
            course_id: CourseId(1),
            package_id: PackageId(1),
            booked_at: d,
            play_date: d,
            price_paid: price,
            options: OptionVector::default(),
            party_size: 1,
            num_parties: 1,
        };
        assert_eq!(user_spending_stats(&[mk(9000)]).unwrap(), (9000.0, 0.0));
        assert_eq!(user_spending_stats(&[mk(8000), mk(12000)]).unwrap(), (10000.0, 2000.0));
        assert!(user_spending_stats(&[]).is_err());
    }

    #[test]
    fn expansion_shapes() {
        let p = package(1, 3, 100);
        assert_eq!(PriceExpansion::MainEffects.row(&p).len(), 29);
        assert_eq!(PriceExpansion::MainEffects.names().len(), 29);
        assert_eq!(PriceExpansion::Pairwise.row(&p).len(), 148);
        assert_eq!(PriceExpansion::Pairwise.names().len(), 148);
        assert_eq!(PriceExpansion::for_rows(100), PriceExpansion::MainEffects);
        assert_eq!(PriceExpansion::for_rows(153), PriceExpansion::Pairwise);
    }

    #[test]
    fn too_few_rows_rejected() {
        let pkgs: Vec<Package> = (0..10).map(|i| package(i, 1 + i % 12, 1000)).collect();
        assert!(fit_price_model(&pkgs, PriceExpansion::MainEffects).is_err());
    }

    #[test]
    fn cholesky_solves_small_system() {
        let x = cholesky_solve(vec![4.0, 2.0, 2.0, 3.0], vec![2.0, 1.0], 2).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn similarity_properties(
            gap in -50_000.0f64..50_000.0,
            extra in 1.0f64..10_000.0,
            sigma in 0.0f64..20_000.0,
            omega in 1.0f64..5_000.0,
            r in 0.5f64..2.0,
            scale in 0.1f64..10.0,
        ) {
            let s = price_gap_similarity(gap, sigma, omega, r).unwrap();
            prop_assert!(s > 0.0 && s <= 1.0);
            prop_assert_eq!(s == 1.0, gap == 0.0);
            let wider = price_gap_similarity(gap.abs() + extra, sigma, omega, r).unwrap();
            prop_assert!(wider < s);
            if gap != 0.0 {
                let looser = price_gap_similarity(gap, sigma + extra, omega, r).unwrap();
                prop_assert!(looser > s);
            }
            let scaled = price_gap_similarity(gap * scale, sigma * scale, omega * scale, r).unwrap();
            prop_assert!((scaled - s).abs() < 1e-12);
            let ab = seasonal_ratio(&SeasonalIndex { values: [r, 1.0, 1.3, 0.9, 1.1, 0.7, 1.0, 1.0, 1.2, 0.8, 1.0, 1.0] }, 1, 3);
            let ba = seasonal_ratio(&SeasonalIndex { values: [r, 1.0, 1.3, 0.9, 1.1, 0.7, 1.0, 1.0, 1.2, 0.8, 1.0, 1.0] }, 3, 1);
            prop_assert!((ab * ba - 1.0).abs() < 1e-12);
        }
    }
}
