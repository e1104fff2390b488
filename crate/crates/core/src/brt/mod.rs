//! Stochastic gradient boosted regression trees under squared-error loss.

mod boost;
mod features;
mod inspect;
mod io;
mod split;
mod tree;

pub use boost::{fit_brt, BoostedModel};
pub use features::{categorical, numeric, FeatureInfo, FeatureMatrix};
pub use inspect::{partial_dependence, variable_importance, PdPoint};
pub use io::{read_model, write_model, FORMAT_VERSION, MAGIC};
pub use split::{best_split, Branch, NodeRows, Split, SplitRule};
pub use tree::{grow_tree, Node, RegressionTree};

use crate::error::Result;
use crate::ingest::{log_transform, CovariateSchema, ModelSpec, SiteRecord};

/// Fits the model described by `spec` to ln(target) of `records`.
pub fn fit_spec(
    schema: &CovariateSchema,
    records: &[SiteRecord],
    spec: &ModelSpec,
    seed: u64,
) -> Result<BoostedModel> {
    spec.validate(schema)?;
    let x = FeatureMatrix::from_records(schema, records, &spec.predictors)?;
    let z = log_transform(records)?;
    fit_brt(&x, &z, &spec.brt, seed)
}

/// Log-scale predictions H(X).
pub fn predict_brt(
    model: &BoostedModel,
    schema: &CovariateSchema,
    records: &[SiteRecord],
) -> Result<Vec<f64>> {
    model.predict_records(schema, records)
}
