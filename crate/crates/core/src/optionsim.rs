//! Per-segment logistic models predicting the options of a user's next
//! booking, and the user-weighed option similarity built on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::behavior::{build_user_vector, UserSegmentation, USER_DIM_NAMES};
use crate::domain::{Booking, Catalog, OptionFlag, Package, UserId, NUM_OPTION_FLAGS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(dims: usize) -> Self {
        Self {
            intercept: 0.0,
            coefficients: vec![0.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.coefficients.len()
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

/// Logistic function restricted to the open interval (0, 1): saturated
/// values are pinned to the nearest representable numbers inside it.
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Probability that the option is taken, given a standardized user vector.
pub fn option_probability(m: &LogisticModel, u_std: &[f64]) -> Result<f64> {
    if u_std.len() != m.dims() {
        return Err(Error::DimensionMismatch {
            expected: m.dims(),
            actual: u_std.len(),
        });
    }
    Ok(sigmoid(m.logit(u_std)))
}

/// Mean log-loss plus `l2 / 2 * |coefficients|^2` (intercept unpenalized),
/// and its gradient in the same layout as the model.
pub fn loss_and_gradient(
    m: &LogisticModel,
    xs: &[Vec<f64>],
    ys: &[f64],
    l2: f64,
) -> (f64, LogisticModel) {
    let n = xs.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = LogisticModel::zeros(m.dims());
    for (x, &y) in xs.iter().zip(ys) {
        let z = m.logit(x);
        loss += softplus(z) - y * z;
        let r = sigmoid_unclamped(z) - y;
        grad.intercept += r;
        for (g, v) in grad.coefficients.iter_mut().zip(x) {
            *g += r * v;
        }
    }
    loss /= n;
    grad.intercept /= n;
    for (g, b) in grad.coefficients.iter_mut().zip(&m.coefficients) {
        *g = *g / n + l2 * b;
    }
    loss += 0.5 * l2 * m.coefficients.iter().map(|b| b * b).sum::<f64>();
    (loss, grad)
}

fn sigmoid_unclamped(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub min_improvement: f64,
    /// Constant-response cells predict within `[clamp, 1 - clamp]`.
    pub clamp: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2: 1e-4,
            max_epochs: 500,
            min_improvement: 1e-8,
            clamp: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub n_samples: usize,
    pub positives: usize,
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// All responses equal (or no samples): the cell holds a clamped constant.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionCell {
    pub model: LogisticModel,
    pub meta: CellMeta,
}

/// Full-batch gradient descent with step halving whenever the loss would
/// increase.
pub fn fit_logistic(xs: &[Vec<f64>], ys: &[f64], dims: usize, cfg: &LogisticConfig) -> OptionCell {
    let positives = ys.iter().filter(|&&y| y > 0.5).count();
    let n = ys.len();
    if n == 0 || positives == 0 || positives == n {
        let rate = if n == 0 { 0.5 } else { positives as f64 / n as f64 };
        let p = rate.clamp(cfg.clamp, 1.0 - cfg.clamp);
        let model = LogisticModel {
            intercept: (p / (1.0 - p)).ln(),
            coefficients: vec![0.0; dims],
        };
        let (loss, _) = loss_and_gradient(&model, xs, ys, cfg.l2);
        let (initial, _) = loss_and_gradient(&LogisticModel::zeros(dims), xs, ys, cfg.l2);
        return OptionCell {
            model,
            meta: CellMeta {
                n_samples: n,
                positives,
                iterations: 0,
                initial_loss: initial,
                final_loss: loss,
                constant: true,
            },
        };
    }

    let mut model = LogisticModel::zeros(dims);
    let (mut loss, mut grad) = loss_and_gradient(&model, xs, ys, cfg.l2);
    let initial_loss = loss;
    let mut lr = cfg.learning_rate;
    let mut iterations = 0;
    while iterations < cfg.max_epochs {
        iterations += 1;
        let candidate = LogisticModel {
            intercept: model.intercept - lr * grad.intercept,
            coefficients: model
                .coefficients
                .iter()
                .zip(&grad.coefficients)
                .map(|(b, g)| b - lr * g)
                .collect(),
        };
        let (c_loss, c_grad) = loss_and_gradient(&candidate, xs, ys, cfg.l2);
        if c_loss > loss {
            lr /= 2.0;
            if lr < 1e-12 {
                break;
            }
            continue;
        }
        let improvement = loss - c_loss;
        model = candidate;
        loss = c_loss;
        grad = c_grad;
        if improvement < cfg.min_improvement {
            break;
        }
    }
    OptionCell {
        model,
        meta: CellMeta {
            n_samples: n,
            positives,
            iterations,
            initial_loss,
            final_loss: loss,
            constant: false,
        },
    }
}

/// One leave-last-out training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub user: UserId,
    pub cluster: usize,
    /// Standardized vector of the history without the last booking.
    pub features: Vec<f64>,
    /// Options of the held-out last booking.
    pub response: [bool; NUM_OPTION_FLAGS],
}

/// Samples for every user with at least two bookings. Each history must be
/// in `booked_at` order; the last entry is the response.
pub fn build_training_samples(
    histories: &BTreeMap<UserId, Vec<Booking>>,
    catalog: &Catalog,
    segmentation: &UserSegmentation,
) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for (user, history) in histories {
        let Some((last, rest)) = history.split_last() else {
            continue;
        };
        if rest.is_empty() {
            continue;
        }
        let cluster = segmentation
            .cluster_of(*user)
            .ok_or_else(|| Error::InvalidInput(format!("user {user} has no cluster")))?;
        let v = build_user_vector(rest, catalog)?;
        out.push(TrainingSample {
            user: *user,
            cluster,
            features: segmentation.standardizer.apply(&v.to_array())?,
            response: last.options.flags(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionModelSet {
    pub dims: usize,
    /// `cells[cluster][option]`, options in [`OptionFlag::ALL`] order.
    pub cells: Vec<Vec<OptionCell>>,
}

impl OptionModelSet {
    pub fn n_clusters(&self) -> usize {
        self.cells.len()
    }

    pub fn model(&self, cluster: usize, flag: OptionFlag) -> Result<&LogisticModel> {
        self.cells
            .get(cluster)
            .map(|row| &row[flag.index()].model)
            .ok_or(Error::UnknownCluster(cluster))
    }

    /// Next-booking probability of every option for one user.
    pub fn probabilities(&self, u_std: &[f64], cluster: usize) -> Result<[f64; NUM_OPTION_FLAGS]> {
        let row = self.cells.get(cluster).ok_or(Error::UnknownCluster(cluster))?;
        let mut out = [0.0; NUM_OPTION_FLAGS];
        for (p, cell) in out.iter_mut().zip(row) {
            *p = option_probability(&cell.model, u_std)?;
        }
        Ok(out)
    }
}

pub fn train_option_models(
    samples: &[TrainingSample],
    n_clusters: usize,
    dims: usize,
    cfg: &LogisticConfig,
) -> Result<OptionModelSet> {
    if let Some(s) = samples.iter().find(|s| s.features.len() != dims) {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: s.features.len(),
        });
    }
    if let Some(s) = samples.iter().find(|s| s.cluster >= n_clusters) {
        return Err(Error::UnknownCluster(s.cluster));
    }
    let mut cells = Vec::with_capacity(n_clusters);
    for cluster in 0..n_clusters {
        let members: Vec<&TrainingSample> =
            samples.iter().filter(|s| s.cluster == cluster).collect();
        let xs: Vec<Vec<f64>> = members.iter().map(|s| s.features.clone()).collect();
        let row = OptionFlag::ALL
            .iter()
            .map(|flag| {
                let ys: Vec<f64> = members
                    .iter()
                    .map(|s| f64::from(u8::from(s.response[flag.index()])))
                    .collect();
                fit_logistic(&xs, &ys, dims, cfg)
            })
            .collect();
        cells.push(row);
    }
    Ok(OptionModelSet { dims, cells })
}

/// Sum over options of the probability that the user's next booking agrees
/// with the package on that option: `P_k` when the flag is set, `1 - P_k`
/// when it is not.
pub fn option_match_score(flags: &[bool; NUM_OPTION_FLAGS], probs: &[f64; NUM_OPTION_FLAGS]) -> f64 {
    flags
        .iter()
        .zip(probs)
        .map(|(&set, &p)| if set { p } else { 1.0 - p })
        .sum()
}

pub fn option_similarity(
    p: &Package,
    u_std: &[f64],
    models: &OptionModelSet,
    cluster: usize,
) -> Result<f64> {
    let probs = models.probabilities(u_std, cluster)?;
    Ok(option_match_score(&p.options.flags(), &probs))
}

/// One row of the weights report: a user attribute (or the intercept) and
/// its weight for each option, within one cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightRow {
    pub cluster: usize,
    pub attribute: String,
    pub lunch: f64,
    pub caddie: f64,
    pub competition: f64,
    pub holiday: f64,
    pub pair_party: f64,
}

pub fn weights_table(models: &OptionModelSet) -> Vec<WeightRow> {
    let mut rows = Vec::new();
    for (cluster, cells) in models.cells.iter().enumerate() {
        let w = |f: OptionFlag, d: Option<usize>| {
            let m = &cells[f.index()].model;
            d.map_or(m.intercept, |d| m.coefficients[d])
        };
        let mut push = |attribute: String, d: Option<usize>| {
            rows.push(WeightRow {
                cluster,
                attribute,
                lunch: w(OptionFlag::Lunch, d),
                caddie: w(OptionFlag::Caddie, d),
                competition: w(OptionFlag::Competition, d),
                holiday: w(OptionFlag::Holiday, d),
                pair_party: w(OptionFlag::PairParty, d),
            })
        };
        for (d, name) in USER_DIM_NAMES.iter().enumerate().take(models.dims) {
            push((*name).to_string(), Some(d));
        }
        push("intercept".to_string(), None);
    }
    rows
}
