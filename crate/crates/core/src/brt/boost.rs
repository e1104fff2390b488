use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureInfo, FeatureMatrix};
use super::tree::{grow_tree, Node, RegressionTree};
use crate::error::{Error, Result};
use crate::ingest::{BrtParams, CovariateKind, CovariateSchema, SiteRecord};
use crate::rng;

const STREAM_FOLDS: u64 = 1;
const STREAM_FOLD_FIT: u64 = 2;
const STREAM_FINAL: u64 = 3;

/// Stagewise additive model `f0 + learning_rate · Σ tree_m(x)` on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub features: Vec<FeatureInfo>,
    pub f0: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Relative influence per feature, summing to 100 (all zero without splits).
    pub importance: Vec<f64>,
    pub seed: u64,
    pub bag_fraction: f64,
    pub tree_size: usize,
    pub min_obs_leaf: usize,
    pub max_trees: usize,
    /// Mean squared residual on the learning set after 0..=M* trees.
    pub train_deviance: Vec<f64>,
    /// Mean held-out deviance across internal folds per iteration; empty when
    /// internal cross-validation is disabled.
    pub cv_deviance: Vec<f64>,
}

impl BoostedModel {
    /// The selected number of trees, M*.
    pub fn best_iteration(&self) -> usize {
        self.trees.len()
    }

    /// False when the internal CV optimum sat at `max_trees`, i.e. more trees
    /// might still have helped.
    pub fn stopping_reached(&self) -> bool {
        self.trees.len() < self.max_trees
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = vec![self.f0; x.n_rows];
        for t in &self.trees {
            for (row, o) in out.iter_mut().enumerate() {
                *o += self.learning_rate * t.predict_row(x, row);
            }
        }
        out
    }

    /// Predictions for records laid out by `schema`; levels unknown to the
    /// model follow missing branches.
    pub fn predict_records(
        &self,
        schema: &CovariateSchema,
        records: &[SiteRecord],
    ) -> Result<Vec<f64>> {
        let x = FeatureMatrix::aligned(self.features.clone(), schema, records)?;
        Ok(self.predict(&x))
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }
}

/// Per-feature row orderings (non-missing rows sorted by value) for numeric
/// features; empty for categorical ones.
fn presort(x: &FeatureMatrix) -> Vec<Vec<u32>> {
    x.features
        .iter()
        .zip(&x.columns)
        .map(|(f, col)| match f.kind {
            CovariateKind::Numeric => {
                let mut idx: Vec<u32> = (0..x.n_rows as u32)
                    .filter(|&r| !col[r as usize].is_nan())
                    .collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            }
            CovariateKind::Categorical => Vec::new(),
        })
        .collect()
}

/// One boosting run over a fixed learning matrix, advanced a tree at a time.
struct Booster<'a> {
    x: &'a FeatureMatrix,
    z: &'a [f64],
    order: Vec<Vec<u32>>,
    all_rows: Vec<u32>,
    fitted: Vec<f64>,
    params: &'a BrtParams,
    rng: ChaCha8Rng,
    bag_size: usize,
    perm: Vec<u32>,
    resid: Vec<f64>,
}

impl<'a> Booster<'a> {
    fn new(x: &'a FeatureMatrix, z: &'a [f64], params: &'a BrtParams, rng: ChaCha8Rng) -> Self {
        let n = x.n_rows;
        let f0 = z.iter().sum::<f64>() / n as f64;
        let bag_size = ((params.bag_fraction * n as f64).ceil() as usize).clamp(1, n);
        Self {
            x,
            z,
            order: presort(x),
            all_rows: (0..n as u32).collect(),
            fitted: vec![f0; n],
            params,
            rng,
            bag_size,
            perm: (0..n as u32).collect(),
            resid: vec![0.0; n],
        }
    }

    fn f0(&self) -> f64 {
        self.fitted.first().copied().unwrap_or(0.0)
    }

    fn deviance(&self) -> f64 {
        self.z
            .iter()
            .zip(&self.fitted)
            .map(|(z, f)| (z - f) * (z - f))
            .sum::<f64>()
            / self.z.len() as f64
    }

    fn step(&mut self) -> RegressionTree {
        for ((r, z), f) in self.resid.iter_mut().zip(self.z).zip(&self.fitted) {
            *r = z - f;
        }
        let bag = if self.bag_size < self.perm.len() {
            let (chosen, _) = self.perm.partial_shuffle(&mut self.rng, self.bag_size);
            let mut b = chosen.to_vec();
            b.sort_unstable();
            b
        } else {
            self.all_rows.clone()
        };
        let tree = grow_tree(
            self.x,
            &self.resid,
            &self.order,
            bag,
            &self.all_rows,
            self.params.tree_size,
            self.params.min_obs_leaf,
        );
        let lr = self.params.learning_rate;
        for (row, f) in self.fitted.iter_mut().enumerate() {
            *f += lr * tree.predict_row(self.x, row);
        }
        tree
    }
}

/// Fits boosted trees to `z` with internal cross-validation choosing the
/// number of trees, then refits on all rows up to that number.
pub fn fit_brt(
    x: &FeatureMatrix,
    z: &[f64],
    params: &BrtParams,
    seed: u64,
) -> Result<BoostedModel> {
    params.validate()?;
    if x.n_features() == 0 {
        return Err(Error::Config("empty predictor list".into()));
    }
    let n = x.n_rows;
    assert_eq!(z.len(), n);
    if n < 2 * params.min_obs_leaf || n < 2 {
        return Err(Error::Validation(format!(
            "need at least {} learning rows, have {n}",
            2 * params.min_obs_leaf.max(1)
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite response".into()));
    }

    let mut model = BoostedModel {
        features: x.features.clone(),
        f0: z.iter().sum::<f64>() / n as f64,
        learning_rate: params.learning_rate,
        trees: Vec::new(),
        importance: vec![0.0; x.n_features()],
        seed,
        bag_fraction: params.bag_fraction,
        tree_size: params.tree_size,
        min_obs_leaf: params.min_obs_leaf,
        max_trees: params.max_trees,
        train_deviance: Vec::new(),
        cv_deviance: Vec::new(),
    };
    let constant = z.iter().all(|&v| v == z[0]);
    if constant {
        model.f0 = z[0];
        model.train_deviance = vec![0.0];
        return Ok(model);
    }

    let n_trees = if params.internal_cv_folds >= 2 {
        let (best, curve) = internal_cv(x, z, params, seed)?;
        model.cv_deviance = curve;
        best
    } else {
        params.max_trees
    };

    let mut booster = Booster::new(x, z, params, rng::stream(seed, &[STREAM_FINAL]));
    model.f0 = booster.f0();
    model.train_deviance.push(booster.deviance());
    for _ in 0..n_trees {
        let t = booster.step();
        model.trees.push(t);
        model.train_deviance.push(booster.deviance());
    }
    model.importance = relative_influence(&model.trees, x.n_features());
    Ok(model)
}

/// Returns M* = argmin of mean held-out deviance and that curve.
fn internal_cv(
    x: &FeatureMatrix,
    z: &[f64],
    params: &BrtParams,
    seed: u64,
) -> Result<(usize, Vec<f64>)> {
    let n = x.n_rows;
    let k = params.internal_cv_folds;
    if n < k || n - n.div_ceil(k) < 2 * params.min_obs_leaf {
        return Err(Error::Validation(format!(
            "{n} rows are too few for {k}-fold internal cross-validation"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, &[STREAM_FOLDS]));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % k;
    }

    struct Fold {
        x_learn: FeatureMatrix,
        z_learn: Vec<f64>,
        x_hold: FeatureMatrix,
        z_hold: Vec<f64>,
    }
    let folds: Vec<Fold> = (0..k)
        .map(|f| {
            let learn: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let hold: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            Fold {
                x_learn: x.rows(&learn),
                z_learn: learn.iter().map(|&i| z[i]).collect(),
                x_hold: x.rows(&hold),
                z_hold: hold.iter().map(|&i| z[i]).collect(),
            }
        })
        .collect();

    let mut boosters: Vec<Booster> = folds
        .iter()
        .enumerate()
        .map(|(f, fd)| {
            Booster::new(
                &fd.x_learn,
                &fd.z_learn,
                params,
                rng::stream(seed, &[STREAM_FOLD_FIT, f as u64]),
            )
        })
        .collect();
    let mut hold_pred: Vec<Vec<f64>> = boosters
        .iter()
        .zip(&folds)
        .map(|(b, fd)| vec![b.f0(); fd.z_hold.len()])
        .collect();

    let mean_dev = |hold_pred: &[Vec<f64>]| -> f64 {
        folds
            .iter()
            .zip(hold_pred)
            .map(|(fd, p)| {
                fd.z_hold
                    .iter()
                    .zip(p)
                    .map(|(z, f)| (z - f) * (z - f))
                    .sum::<f64>()
                    / fd.z_hold.len() as f64
            })
            .sum::<f64>()
            / k as f64
    };

    let mut curve = vec![mean_dev(&hold_pred)];
    let mut best = (0usize, curve[0]);
    for m in 1..=params.max_trees {
        for ((b, fd), p) in boosters.iter_mut().zip(&folds).zip(hold_pred.iter_mut()) {
            let t = b.step();
            for (row, v) in p.iter_mut().enumerate() {
                *v += params.learning_rate * t.predict_row(&fd.x_hold, row);
            }
        }
        let d = mean_dev(&hold_pred);
        curve.push(d);
        if d < best.1 {
            best = (m, d);
        }
        if let Some(patience) = params.patience {
            if m - best.0 >= patience {
                break;
            }
        }
    }
    Ok((best.0, curve))
}

/// Sum of split improvements per feature, scaled to total 100.
pub(crate) fn relative_influence(trees: &[RegressionTree], n_features: usize) -> Vec<f64> {
    let mut imp = vec![0.0; n_features];
    for t in trees {
        for node in &t.nodes {
            if let Node::Split {
                feature,
                improvement,
                ..
            } = node
            {
                imp[*feature] += improvement;
            }
        }
    }
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        for v in &mut imp {
            *v *= 100.0 / total;
        }
    }
    imp
}
