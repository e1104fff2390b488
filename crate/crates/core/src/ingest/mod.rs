//! Tabular data model: horizons, sites, covariate schema, model specifications,
//! plus stock computation and dataset I/O.

mod config;
mod dataset;
mod stock;

pub use config::{
    BrtParams, CvSettings, DataPaths, RunConfig, VariogramSettings, WinsorizeSettings,
    DEFAULT_EPSILON,
};
pub use dataset::{
    load_dataset, load_horizons, log_transform, read_dataset, read_horizons, write_dataset,
    LoadMode,
};
pub use stock::{compute_stock, stocks_by_site};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRecord {
    pub site_id: String,
    pub top_cm: f64,
    pub bottom_cm: f64,
    /// g/cm³
    pub bulk_density: f64,
    /// organic carbon, mass percent
    pub soc_pct: f64,
    /// rock fragments, mass fraction
    pub rock_frag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateDef {
    pub name: String,
    pub kind: CovariateKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default = "default_true")]
    pub missing_allowed: bool,
}

fn default_true() -> bool {
    true
}

impl CovariateDef {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Numeric,
            levels: Vec::new(),
            missing_allowed: true,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Categorical,
            levels: levels.into_iter().map(Into::into).collect(),
            missing_allowed: true,
        }
    }

    pub fn level_index(&self, level: &str) -> Option<u32> {
        self.levels
            .iter()
            .position(|l| l == level)
            .map(|i| i as u32)
    }
}

/// Ordered covariate definitions. Site records store covariate values in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CovariateDef>", into = "Vec<CovariateDef>")]
pub struct CovariateSchema {
    covariates: Vec<CovariateDef>,
}

impl CovariateSchema {
    pub fn new(covariates: Vec<CovariateDef>) -> Result<Self> {
        for (i, c) in covariates.iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::Schema("empty covariate name".into()));
            }
            if RESERVED_COLUMNS.contains(&c.name.as_str()) {
                return Err(Error::Schema(format!(
                    "covariate name `{}` is reserved",
                    c.name
                )));
            }
            if covariates[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate covariate `{}`", c.name)));
            }
            match c.kind {
                CovariateKind::Categorical if c.levels.is_empty() => {
                    return Err(Error::Schema(format!(
                        "categorical covariate `{}` has no levels",
                        c.name
                    )));
                }
                CovariateKind::Categorical => {
                    for (j, l) in c.levels.iter().enumerate() {
                        if c.levels[..j].contains(l) {
                            return Err(Error::Schema(format!(
                                "duplicate level `{l}` in `{}`",
                                c.name
                            )));
                        }
                    }
                }
                CovariateKind::Numeric if !c.levels.is_empty() => {
                    return Err(Error::Schema(format!(
                        "numeric covariate `{}` declares levels",
                        c.name
                    )));
                }
                CovariateKind::Numeric => {}
            }
        }
        Ok(Self { covariates })
    }

    pub fn covariates(&self) -> &[CovariateDef] {
        &self.covariates
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&CovariateDef> {
        self.covariates.iter().find(|c| c.name == name)
    }
}

impl TryFrom<Vec<CovariateDef>> for CovariateSchema {
    type Error = Error;
    fn try_from(v: Vec<CovariateDef>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CovariateSchema> for Vec<CovariateDef> {
    fn from(s: CovariateSchema) -> Self {
        s.covariates
    }
}

pub(crate) const RESERVED_COLUMNS: [&str; 4] = ["site_id", "x_km", "y_km", "target"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovValue {
    Numeric(f64),
    /// Index into the schema's level list.
    Level(u32),
    Missing,
}

impl CovValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, CovValue::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteRecord {
    pub site_id: String,
    pub x_km: f64,
    pub y_km: f64,
    /// SOC stock in kg/m²; `None` for prediction-only rows.
    pub target: Option<f64>,
    /// Aligned with the dataset schema.
    pub covariates: Vec<CovValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: CovariateSchema,
    pub records: Vec<SiteRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Observed targets; fails if any record lacks one.
    pub fn targets(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| {
                r.target
                    .ok_or_else(|| Error::Validation(format!("site `{}` has no target", r.site_id)))
            })
            .collect()
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.records.iter().map(|r| [r.x_km, r.y_km]).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// A named model configuration: which covariates feed the trees, the tree
/// hyperparameters, and whether a kriged residual term is added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub predictors: Vec<String>,
    #[serde(default)]
    pub brt: BrtParams,
    #[serde(default)]
    pub spatial: bool,
}

impl ModelSpec {
    pub fn validate(&self, schema: &CovariateSchema) -> Result<()> {
        if self.predictors.is_empty() {
            return Err(Error::Config(format!(
                "model `{}` has no predictors",
                self.name
            )));
        }
        for (i, p) in self.predictors.iter().enumerate() {
            if schema.index_of(p).is_none() {
                return Err(Error::Config(format!(
                    "model `{}`: unknown predictor `{p}`",
                    self.name
                )));
            }
            if self.predictors[..i].contains(p) {
                return Err(Error::Config(format!(
                    "model `{}`: predictor `{p}` listed twice",
                    self.name
                )));
            }
        }
        self.brt.validate()
    }
}
