use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CovValue, CovariateKind, CovariateSchema, SiteRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: CovariateKind,
    /// Level names for categorical features; empty for numeric ones.
    pub levels: Vec<String>,
}

/// Column-major predictor matrix. Missing cells are NaN; categorical cells hold
/// the level index as a float.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub features: Vec<FeatureInfo>,
    pub columns: Vec<Vec<f64>>,
    pub n_rows: usize,
}

impl FeatureMatrix {
    /// Extracts `predictors` (in that order) from records laid out by `schema`.
    pub fn from_records(
        schema: &CovariateSchema,
        records: &[SiteRecord],
        predictors: &[String],
    ) -> Result<Self> {
        let features = predictors
            .iter()
            .map(|p| {
                let def = schema
                    .get(p)
                    .ok_or_else(|| Error::Lookup(format!("unknown predictor `{p}`")))?;
                Ok(FeatureInfo {
                    name: def.name.clone(),
                    kind: def.kind,
                    levels: def.levels.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::aligned(features, schema, records)
    }

    /// Builds columns for an already-fitted feature list, mapping categorical
    /// levels by name. Levels the features do not know become missing.
    pub fn aligned(
        features: Vec<FeatureInfo>,
        schema: &CovariateSchema,
        records: &[SiteRecord],
    ) -> Result<Self> {
        let mut columns = Vec::with_capacity(features.len());
        for f in &features {
            let idx = schema
                .index_of(&f.name)
                .ok_or_else(|| Error::Lookup(format!("data lacks predictor `{}`", f.name)))?;
            let def = &schema.covariates()[idx];
            if def.kind != f.kind {
                return Err(Error::Schema(format!(
                    "predictor `{}` changed kind",
                    f.name
                )));
            }
            let remap: Vec<f64> = def
                .levels
                .iter()
                .map(|l| {
                    f.levels
                        .iter()
                        .position(|m| m == l)
                        .map_or(f64::NAN, |p| p as f64)
                })
                .collect();
            let col = records
                .iter()
                .map(|r| match r.covariates[idx] {
                    CovValue::Numeric(v) if f.kind == CovariateKind::Numeric => v,
                    CovValue::Level(l) if f.kind == CovariateKind::Categorical => remap[l as usize],
                    _ => f64::NAN,
                })
                .collect();
            columns.push(col);
        }
        Ok(Self {
            features,
            columns,
            n_rows: records.len(),
        })
    }

    /// Builds a matrix directly from columns; used by tests and simulations.
    pub fn from_columns(features: Vec<FeatureInfo>, columns: Vec<Vec<f64>>) -> Self {
        let n_rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == n_rows));
        assert_eq!(features.len(), columns.len());
        Self {
            features,
            columns,
            n_rows,
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
            n_rows: idx.len(),
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

pub fn numeric(name: &str) -> FeatureInfo {
    FeatureInfo {
        name: name.into(),
        kind: CovariateKind::Numeric,
        levels: vec![],
    }
}

pub fn categorical(name: &str, n_levels: usize) -> FeatureInfo {
    FeatureInfo {
        name: name.into(),
        kind: CovariateKind::Categorical,
        levels: (0..n_levels).map(|l| format!("L{l}")).collect(),
    }
}
