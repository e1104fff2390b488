use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CovariateSchema, ModelSpec};
use crate::error::{Error, Result};
use crate::variogram::Estimator;

/// Relative measurement error of observed stocks.
pub const DEFAULT_EPSILON: f64 = 0.112;

/// Boosted-tree hyperparameters. `tree_size` is the maximum number of splits per tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrtParams {
    pub tree_size: usize,
    pub learning_rate: f64,
    pub min_obs_leaf: usize,
    pub bag_fraction: f64,
    pub max_trees: usize,
    pub internal_cv_folds: usize,
    /// Stop the internal cross-validation once the mean held-out deviance has
    /// not improved for this many iterations. `None` scans all `max_trees`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
}

impl Default for BrtParams {
    fn default() -> Self {
        Self {
            tree_size: 12,
            learning_rate: 0.01,
            min_obs_leaf: 3,
            bag_fraction: 0.7,
            max_trees: 10_000,
            internal_cv_folds: 5,
            patience: None,
        }
    }
}

impl BrtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.tree_size < 1 {
            return bad("tree_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if self.min_obs_leaf < 1 {
            return bad("min_obs_leaf must be >= 1".into());
        }
        if !(self.bag_fraction > 0.0 && self.bag_fraction <= 1.0) {
            return bad(format!(
                "bag_fraction must lie in (0, 1], got {}",
                self.bag_fraction
            ));
        }
        if self.internal_cv_folds == 1 {
            return bad("internal_cv_folds must be 0 (disabled) or >= 2".into());
        }
        if self.patience == Some(0) {
            return bad("patience must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub sites: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<PathBuf>,
    #[serde(default = "default_depth")]
    pub depth_cm: f64,
}

fn default_depth() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub repetitions: usize,
    pub validation_fraction: f64,
    pub alpha: f64,
    /// Run a full k-way rotation per repetition instead of a single split.
    pub rotation: bool,
    /// Worker threads; `None` uses the available parallelism.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            repetitions: 200,
            validation_fraction: 0.1,
            alpha: 0.05,
            rotation: false,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariogramSettings {
    pub estimator: Estimator,
    pub bins: usize,
    /// Defaults to half the largest inter-site distance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_lag_km: Option<f64>,
    /// Hold the smoothness fixed instead of estimating it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_kappa: Option<f64>,
}

impl Default for VariogramSettings {
    fn default() -> Self {
        Self {
            estimator: Estimator::Dowd,
            bins: 15,
            max_lag_km: None,
            fixed_kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WinsorizeSettings {
    pub c_min: f64,
    pub c_max: f64,
    pub max_iter: usize,
    pub refit_variogram: bool,
    pub theta_tol: f64,
}

impl Default for WinsorizeSettings {
    fn default() -> Self {
        Self {
            c_min: 1.5,
            c_max: 4.0,
            max_iter: 20,
            refit_variogram: false,
            theta_tol: 1e-3,
        }
    }
}

/// Everything a run needs. Parsed from TOML; the seed is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub data: DataPaths,
    pub covariates: CovariateSchema,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub cv: CvSettings,
    #[serde(default)]
    pub variogram: VariogramSettings,
    #[serde(default)]
    pub winsorize: WinsorizeSettings,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data.sites);
        if let Some(h) = cfg.data.horizons.as_mut() {
            resolve(h);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models declared".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Config(format!("duplicate model name `{}`", m.name)));
            }
            m.validate(&self.covariates)?;
        }
        let cv = &self.cv;
        if cv.repetitions == 0 {
            return Err(Error::Config("cv.repetitions must be positive".into()));
        }
        if !(cv.validation_fraction > 0.0 && cv.validation_fraction < 1.0) {
            return Err(Error::Config(
                "cv.validation_fraction must lie in (0, 1)".into(),
            ));
        }
        if !(cv.alpha > 0.0 && cv.alpha < 1.0) {
            return Err(Error::Config("cv.alpha must lie in (0, 1)".into()));
        }
        if cv.workers == Some(0) {
            return Err(Error::Config("cv.workers must be positive".into()));
        }
        if self.variogram.bins < 4 {
            return Err(Error::Config("variogram.bins must be >= 4".into()));
        }
        let w = &self.winsorize;
        if !(w.c_min > 0.0 && w.c_min < w.c_max) {
            return Err(Error::Config(
                "winsorize bounds must satisfy 0 < c_min < c_max".into(),
            ));
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<&ModelSpec> {
        self.models
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Lookup(format!("no model named `{name}`")))
    }
}
