//! Repeated learning/validation splits over several model specifications.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::metrics::{metrics, Metric, MetricSet};
use crate::brt::{fit_spec, predict_brt, BoostedModel};
use crate::error::{Error, ErrorCategory, Result};
use crate::ingest::{
    log_transform, BrtParams, Dataset, ModelSpec, RunConfig, VariogramSettings, WinsorizeSettings,
    DEFAULT_EPSILON,
};
use crate::kriging::{fit_residual_model, predict_lognormal, ThetaStats};
use crate::rng::{derive_seed, stream};
use crate::stats::{iqr, mean, variance};
use crate::variogram::MaternModel;

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub repetitions: usize,
    pub validation_fraction: f64,
    pub alpha: f64,
    /// Cycle through all `round(1 / validation_fraction)` folds in each repetition.
    pub rotation: bool,
    pub workers: Option<usize>,
    pub seed: u64,
    pub epsilon: f64,
    pub variogram: VariogramSettings,
    pub winsorize: WinsorizeSettings,
}

impl CvOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            repetitions: 200,
            validation_fraction: 0.1,
            alpha: 0.05,
            rotation: false,
            workers: None,
            seed,
            epsilon: DEFAULT_EPSILON,
            variogram: VariogramSettings::default(),
            winsorize: WinsorizeSettings::default(),
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            repetitions: cfg.cv.repetitions,
            validation_fraction: cfg.cv.validation_fraction,
            alpha: cfg.cv.alpha,
            rotation: cfg.cv.rotation,
            workers: cfg.cv.workers,
            seed: cfg.seed,
            epsilon: cfg.epsilon,
            variogram: cfg.variogram.clone(),
            winsorize: cfg.winsorize.clone(),
        }
    }
}

/// What happened in one learning/validation fold for one spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub n_learning: usize,
    pub n_validation: usize,
    pub n_trees: usize,
    pub brt_train_deviance: f64,
    pub initial_variogram: Option<MaternModel>,
    pub variogram: Option<MaternModel>,
    pub winsorize_c: Option<f64>,
    pub n_flagged: usize,
    pub theta_before: Option<ThetaStats>,
    pub theta_after: Option<ThetaStats>,
    pub valid: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SitePrediction {
    /// Row index in the dataset.
    pub site: usize,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub model: String,
    pub repetition: usize,
    /// `None` when a spatial step failed in any fold.
    pub metrics: Option<MetricSet>,
    pub folds: Vec<FoldDiagnostics>,
    pub predictions: Vec<SitePrediction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub spatial: bool,
    pub n_valid: usize,
    pub n_failed: usize,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub models: Vec<String>,
    pub alpha: f64,
    /// Interquartile range of every observed target.
    pub iq_y: f64,
    pub repetitions: usize,
    /// Ordered by repetition, then by model.
    pub results: Vec<RepetitionResult>,
    pub summaries: Vec<ModelSummary>,
}

impl CvReport {
    /// Metric values of the valid repetitions of `model`, in repetition order.
    pub fn metric_values(&self, model: &str, metric: Metric) -> Vec<f64> {
        self.results
            .iter()
            .filter(|r| r.model == model)
            .filter_map(|r| r.metrics.map(|m| m.get(metric)))
            .collect()
    }

    pub fn summary(&self, model: &str) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.model == model)
    }
}

/// Learning and validation row indices (each sorted) for one repetition.
pub fn split_indices(
    n: usize,
    validation_fraction: f64,
    seed: u64,
    repetition: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[10, repetition as u64]));
    let n_val = ((validation_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut val = idx[..n_val].to_vec();
    let mut learn = idx[n_val..].to_vec();
    val.sort_unstable();
    learn.sort_unstable();
    (learn, val)
}

/// Validation folds of a full rotation: `k` disjoint sets covering every row.
pub fn rotation_folds(n: usize, k: usize, seed: u64, repetition: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[10, repetition as u64]));
    let mut folds = vec![Vec::new(); k];
    for (pos, &i) in idx.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

fn validation_sets(n: usize, opts: &CvOptions, repetition: usize) -> Vec<Vec<usize>> {
    if opts.rotation {
        let k = ((1.0 / opts.validation_fraction).round() as usize).clamp(2, n);
        rotation_folds(n, k, opts.seed, repetition)
    } else {
        vec![split_indices(n, opts.validation_fraction, opts.seed, repetition).1]
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e.category(),
        ErrorCategory::Numeric | ErrorCategory::Validity
    )
}

struct SpecAccumulator {
    predictions: Vec<SitePrediction>,
    folds: Vec<FoldDiagnostics>,
    valid: bool,
}

/// Runs every spec on one repetition. Learning-set fits see only learning rows.
pub fn run_repetition(
    dataset: &Dataset,
    specs: &[ModelSpec],
    opts: &CvOptions,
    iq_y: f64,
    repetition: usize,
) -> Result<Vec<RepetitionResult>> {
    let n = dataset.len();
    let mut acc: Vec<SpecAccumulator> = specs
        .iter()
        .map(|_| SpecAccumulator {
            predictions: Vec::new(),
            folds: Vec::new(),
            valid: true,
        })
        .collect();

    for (f, val_idx) in validation_sets(n, opts, repetition).iter().enumerate() {
        let mut is_val = vec![false; n];
        for &i in val_idx {
            is_val[i] = true;
        }
        let learn_idx: Vec<usize> = (0..n).filter(|&i| !is_val[i]).collect();
        let learning = dataset.subset(&learn_idx);
        let validation = dataset.subset(val_idx);
        let z_learn = log_transform(&learning.records)?;
        let y_val = validation.targets()?;
        let learn_coords = learning.coords();
        let brt_seed = derive_seed(opts.seed, &[20, repetition as u64, f as u64]);
        let mut cache: Vec<(&[String], &BrtParams, Arc<BoostedModel>)> = Vec::new();

        for (spec, a) in specs.iter().zip(acc.iter_mut()) {
            let brt = match cache
                .iter()
                .find(|(p, b, _)| *p == spec.predictors.as_slice() && **b == spec.brt)
            {
                Some((_, _, m)) => Arc::clone(m),
                None => {
                    let m = Arc::new(fit_spec(
                        &dataset.schema,
                        &learning.records,
                        spec,
                        brt_seed,
                    )?);
                    cache.push((&spec.predictors, &spec.brt, Arc::clone(&m)));
                    m
                }
            };
            let h_val = predict_brt(&brt, &dataset.schema, &validation.records)?;
            let mut diag = FoldDiagnostics {
                n_learning: learn_idx.len(),
                n_validation: val_idx.len(),
                n_trees: brt.best_iteration(),
                brt_train_deviance: *brt.train_deviance.last().unwrap_or(&f64::NAN),
                initial_variogram: None,
                variogram: None,
                winsorize_c: None,
                n_flagged: 0,
                theta_before: None,
                theta_after: None,
                valid: true,
                failure: None,
            };
            let predicted: Option<Vec<f64>> = if spec.spatial {
                let h_learn = predict_brt(&brt, &dataset.schema, &learning.records)?;
                let u: Vec<f64> = z_learn.iter().zip(&h_learn).map(|(z, h)| z - h).collect();
                match fit_residual_model(
                    &learn_coords,
                    &u,
                    opts.epsilon,
                    &opts.variogram,
                    &opts.winsorize,
                ) {
                    Ok(rm) => {
                        diag.initial_variogram = Some(rm.initial.model);
                        diag.variogram = Some(rm.winsorized.model);
                        diag.winsorize_c = rm.winsorized.c;
                        diag.n_flagged = rm.winsorized.n_flagged();
                        diag.theta_before = Some(rm.winsorized.before);
                        diag.theta_after = Some(rm.winsorized.after);
                        let y: Result<Vec<f64>> = validation
                            .records
                            .iter()
                            .zip(&h_val)
                            .map(|(r, &h)| {
                                predict_lognormal(h, &rm.kriger.predict([r.x_km, r.y_km]))
                            })
                            .collect();
                        Some(y?)
                    }
                    Err(e) if recoverable(&e) => {
                        diag.valid = false;
                        diag.failure = Some(e.to_string());
                        None
                    }
                    Err(e) => return Err(e),
                }
            } else {
                Some(h_val.iter().map(|h| h.exp()).collect())
            };
            match predicted {
                Some(p) => a
                    .predictions
                    .extend(val_idx.iter().zip(y_val.iter().zip(p)).map(
                        |(&site, (&observed, predicted))| SitePrediction {
                            site,
                            observed,
                            predicted,
                        },
                    )),
                None => a.valid = false,
            }
            a.folds.push(diag);
        }
    }

    specs
        .iter()
        .zip(acc)
        .map(|(spec, mut a)| {
            a.predictions.sort_by_key(|p| p.site);
            let metrics = if a.valid {
                let obs: Vec<f64> = a.predictions.iter().map(|p| p.observed).collect();
                let pred: Vec<f64> = a.predictions.iter().map(|p| p.predicted).collect();
                Some(metrics(&obs, &pred, iq_y)?)
            } else {
                a.predictions.clear();
                None
            };
            Ok(RepetitionResult {
                model: spec.name.clone(),
                repetition,
                metrics,
                folds: a.folds,
                predictions: a.predictions,
            })
        })
        .collect()
}

fn summarize(spec: &ModelSpec, results: &[RepetitionResult]) -> ModelSummary {
    let mine: Vec<&RepetitionResult> = results.iter().filter(|r| r.model == spec.name).collect();
    let valid: Vec<MetricSet> = mine.iter().filter_map(|r| r.metrics).collect();
    let metrics = Metric::ALL
        .iter()
        .map(|&metric| {
            let v: Vec<f64> = valid.iter().map(|m| m.get(metric)).collect();
            let (m, half) = match v.len() {
                0 => (f64::NAN, f64::NAN),
                1 => (v[0], f64::NAN),
                k => {
                    let t = StudentsT::new(0.0, 1.0, (k - 1) as f64)
                        .map(|d| d.inverse_cdf(0.975))
                        .unwrap_or(f64::NAN);
                    (mean(&v), t * (variance(&v) / k as f64).sqrt())
                }
            };
            MetricSummary {
                metric,
                mean: m,
                ci_low: m - half,
                ci_high: m + half,
            }
        })
        .collect();
    ModelSummary {
        model: spec.name.clone(),
        spatial: spec.spatial,
        n_valid: valid.len(),
        n_failed: mine.len() - valid.len(),
        metrics,
    }
}

/// Monte Carlo cross-validation. Repetitions run in parallel; every random
/// draw is keyed by `(seed, repetition)` so the report does not depend on the
/// number of workers.
pub fn run_cv(dataset: &Dataset, specs: &[ModelSpec], opts: &CvOptions) -> Result<CvReport> {
    if specs.is_empty() {
        return Err(Error::Config(
            "cross-validation needs at least one model".into(),
        ));
    }
    for (i, s) in specs.iter().enumerate() {
        s.validate(&dataset.schema)?;
        if specs[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::Config(format!("duplicate model name `{}`", s.name)));
        }
    }
    if opts.repetitions == 0 || !(opts.validation_fraction > 0.0 && opts.validation_fraction < 1.0)
    {
        return Err(Error::Config(
            "need positive repetitions and a validation fraction in (0, 1)".into(),
        ));
    }
    if dataset.len() < 10 {
        return Err(Error::Validation(format!(
            "cross-validation needs at least 10 sites, got {}",
            dataset.len()
        )));
    }
    let iq_y = iqr(&dataset.targets()?);
    log_transform(&dataset.records)?;

    let work = || -> Result<Vec<Vec<RepetitionResult>>> {
        (0..opts.repetitions)
            .into_par_iter()
            .map(|r| run_repetition(dataset, specs, opts, iq_y, r))
            .collect()
    };
    let per_rep = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let results: Vec<RepetitionResult> = per_rep.into_iter().flatten().collect();
    let summaries = specs.iter().map(|s| summarize(s, &results)).collect();
    Ok(CvReport {
        models: specs.iter().map(|s| s.name.clone()).collect(),
        alpha: opts.alpha,
        iq_y,
        repetitions: opts.repetitions,
        results,
        summaries,
    })
}
