//! On-disk layout of a trained model.
//!
//! A model directory holds five fitted artifacts plus `model.json` (config
//! and training date) and `weights.json` (fusion weights per setting).
//! Artifact bytes are a pure function of the fitted state, so identical
//! inputs give identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::behavior::{Clustering, Standardizer, UserSegmentation};
use crate::coursecf::CooccurrenceMatrix;
use crate::domain::UserId;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::optionsim::OptionModelSet;
use crate::pricesim::SeasonalIndex;
use crate::ranker::{FusionWeights, ModelConfig, Setting, TrainedRecommender};

pub const STANDARDIZER: &str = "standardizer.json";
pub const CLUSTERING: &str = "clustering.json";
pub const OPTION_MODELS: &str = "option_models.json";
pub const COOCCURRENCE: &str = "cooccurrence.csv";
pub const SEASONAL_INDEX: &str = "seasonal_index.json";
pub const MODEL_META: &str = "model.json";
pub const WEIGHTS: &str = "weights.json";

pub const ARTIFACTS: [&str; 5] = [STANDARDIZER, CLUSTERING, OPTION_MODELS, COOCCURRENCE, SEASONAL_INDEX];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClusteringFile {
    clustering: Clustering,
    fitted_users: Vec<UserId>,
    clusters: BTreeMap<UserId, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub as_of: NaiveDate,
    pub config: ModelConfig,
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

/// The five artifacts as `(file name, bytes)`, in `ARTIFACTS` order.
pub fn artifact_bytes(model: &TrainedRecommender) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let seg = &model.segmentation;
    Ok(vec![
        (STANDARDIZER, json_bytes(&seg.standardizer)?),
        (
            CLUSTERING,
            json_bytes(&ClusteringFile {
                clustering: seg.clustering.clone(),
                fitted_users: seg.fitted_users.clone(),
                clusters: seg.clusters.clone(),
            })?,
        ),
        (OPTION_MODELS, json_bytes(&model.option_models)?),
        (COOCCURRENCE, model.cooccurrence.triplet_bytes()?),
        (SEASONAL_INDEX, json_bytes(&model.seasonal_index)?),
    ])
}

/// Writes the artifacts, `model.json` and `weights.json`. Returns the
/// artifact bytes so callers can hash them without rereading.
pub fn save_model(model: &TrainedRecommender, dir: &Path) -> Result<Vec<(&'static str, Vec<u8>)>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let artifacts = artifact_bytes(model)?;
    for (name, bytes) in &artifacts {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(path, e))?;
    }
    write_json(
        &dir.join(MODEL_META),
        &ModelMeta {
            as_of: model.as_of,
            config: model.config.clone(),
        },
    )?;
    save_weights(&model.weights, dir)?;
    Ok(artifacts)
}

pub fn save_weights(weights: &BTreeMap<Setting, FusionWeights>, dir: &Path) -> Result<()> {
    write_json(&dir.join(WEIGHTS), weights)
}

pub fn load_model(dir: &Path) -> Result<TrainedRecommender> {
    let meta: ModelMeta = read_json(&dir.join(MODEL_META))?;
    let standardizer: Standardizer = read_json(&dir.join(STANDARDIZER))?;
    let c: ClusteringFile = read_json(&dir.join(CLUSTERING))?;
    let option_models: OptionModelSet = read_json(&dir.join(OPTION_MODELS))?;
    let cooccurrence = CooccurrenceMatrix::read_triplets(&dir.join(COOCCURRENCE))?;
    let seasonal_index: SeasonalIndex = read_json(&dir.join(SEASONAL_INDEX))?;
    let weights: BTreeMap<Setting, FusionWeights> = read_json(&dir.join(WEIGHTS))?;
    if option_models.n_clusters() != c.clustering.k {
        return Err(Error::InvalidInput(format!(
            "option models cover {} clusters, clustering has {}",
            option_models.n_clusters(),
            c.clustering.k
        )));
    }
    Ok(TrainedRecommender {
        config: meta.config,
        as_of: meta.as_of,
        segmentation: UserSegmentation {
            standardizer,
            clustering: c.clustering,
            fitted_users: c.fitted_users,
            clusters: c.clusters,
        },
        option_models,
        cooccurrence,
        seasonal_index,
        weights,
    })
}
