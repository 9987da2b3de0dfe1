//! Run configuration: one TOML file, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use coldpack::ranker::{HillClimbConfig, ModelConfig, Setting};
use coldpack::synthgen::GeneratorConfig;
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const SNAPSHOT_FILE: &str = "run_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub cutoff: NaiveDate,
    pub horizon: i64,
    pub settings: Vec<Setting>,
    /// Longest list length scored (EMP@1..n_max).
    pub n_max: usize,
    /// Tune fusion weights on the inner validation window before scoring.
    pub tune: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cutoff: NaiveDate::from_ymd_opt(2013, 5, 31).expect("valid date"),
            horizon: 15,
            settings: Setting::ALL.to_vec(),
            n_max: 20,
            tune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, seeds the generator, k-means restarts and hill-climbing.
    pub seed: Option<u64>,
    pub log_level: String,
    pub data: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub eval: EvalConfig,
    pub model: ModelConfig,
    pub tuning: HillClimbConfig,
    pub generator: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            log_level: "info".into(),
            data: None,
            model_dir: None,
            out: None,
            eval: EvalConfig::default(),
            model: ModelConfig::default(),
            tuning: HillClimbConfig::default(),
            generator: GeneratorConfig::default(),
        }
    }
}

/// Hyperparameter overrides shared by several subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub top_m: Option<usize>,
    pub omega: Option<f64>,
    pub lambda: Option<f64>,
    pub step: Option<f64>,
    pub tune_n: Option<usize>,
    pub n_max: Option<usize>,
    pub cutoff: Option<NaiveDate>,
    pub horizon: Option<i64>,
    pub settings: Option<Vec<Setting>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| UsageError::Config(format!("{}: {e}", path.display())).into())
    }

    /// Flags win over file values.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(seed) = self.seed {
            self.generator.seed = seed;
            self.model.seed = seed;
            self.tuning.seed = seed;
        }
        if let Some(k) = o.k {
            self.model.kmeans.k = k;
        }
        if let Some(m) = o.top_m {
            self.model.top_m = m;
        }
        if let Some(w) = o.omega {
            self.model.omega = w;
        }
        if let Some(l) = o.lambda {
            self.model.logistic.l2 = l;
        }
        if let Some(s) = o.step {
            self.tuning.step = s;
        }
        if let Some(n) = o.tune_n {
            self.tuning.n = n;
        }
        if let Some(n) = o.n_max {
            self.eval.n_max = n;
        }
        if let Some(c) = o.cutoff {
            self.eval.cutoff = c;
        }
        if let Some(h) = o.horizon {
            self.eval.horizon = h;
        }
        if let Some(s) = &o.settings {
            self.eval.settings = s.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.model.validate()?;
        if self.eval.settings.is_empty() {
            return Err(UsageError::Config("settings: no settings given".into()).into());
        }
        if self.eval.horizon < 1 {
            return Err(UsageError::Config("horizon: must be at least 1 day".into()).into());
        }
        if self.eval.n_max < 1 || self.tuning.n < 1 {
            return Err(UsageError::Config("N: list lengths must be at least 1".into()).into());
        }
        if !(self.tuning.step > 0.0) || !(self.tuning.min_step > 0.0) {
            return Err(UsageError::Config("step: must be positive".into()).into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Writes `run_config.toml` into `dir`.
    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(SNAPSHOT_FILE);
        fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }
}
