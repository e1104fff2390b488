use super::boost::BoostedModel;
use super::features::FeatureMatrix;
use crate::error::{Error, Result};
use crate::ingest::CovariateKind;

/// Relative influence of each predictor, by name.
pub fn variable_importance(model: &BoostedModel) -> Vec<(String, f64)> {
    model
        .features
        .iter()
        .zip(&model.importance)
        .map(|(f, &v)| (f.name.clone(), v))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdPoint {
    /// Grid value, or the level name for categorical predictors.
    pub label: String,
    pub x: f64,
    /// Mean log-scale prediction with the predictor forced to `x`.
    pub value: f64,
}

/// Partial dependence of the prediction on one predictor: at each grid value,
/// the mean prediction over `data` with that predictor overwritten. Categorical
/// predictors yield one point per level and ignore `grid`; numeric predictors
/// default to 20 points spanning the observed 5–95% quantiles.
pub fn partial_dependence(
    model: &BoostedModel,
    data: &FeatureMatrix,
    covariate: &str,
    grid: Option<&[f64]>,
) -> Result<Vec<PdPoint>> {
    let j = model
        .features
        .iter()
        .position(|f| f.name == covariate)
        .ok_or_else(|| Error::Lookup(format!("covariate `{covariate}` is not in the model")))?;
    if data.features != model.features {
        return Err(Error::Schema(
            "partial dependence data does not match the model's predictors".into(),
        ));
    }
    let feat = &model.features[j];
    let points: Vec<(String, f64)> = match feat.kind {
        CovariateKind::Categorical => feat
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as f64))
            .collect(),
        CovariateKind::Numeric => {
            let g = match grid {
                Some(g) => g.to_vec(),
                None => {
                    let obs: Vec<f64> = data.columns[j]
                        .iter()
                        .copied()
                        .filter(|v| !v.is_nan())
                        .collect();
                    if obs.is_empty() {
                        return Err(Error::Validation(format!(
                            "`{covariate}` is missing everywhere"
                        )));
                    }
                    let lo = crate::stats::quantile(&obs, 0.05);
                    let hi = crate::stats::quantile(&obs, 0.95);
                    (0..20).map(|i| lo + (hi - lo) * i as f64 / 19.0).collect()
                }
            };
            g.into_iter().map(|v| (v.to_string(), v)).collect()
        }
    };
    let mut work = data.clone();
    Ok(points
        .into_iter()
        .map(|(label, x)| {
            work.columns[j].iter_mut().for_each(|c| *c = x);
            let p = model.predict(&work);
            PdPoint {
                label,
                x,
                value: p.iter().sum::<f64>() / p.len() as f64,
            }
        })
        .collect())
}
