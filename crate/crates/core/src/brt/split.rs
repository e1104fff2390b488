//! Exhaustive split search for squared-error regression trees with a dedicated
//! missing-value branch.

use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use crate::ingest::CovariateKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// `x < threshold` goes left, other non-missing values go right.
    Numeric { threshold: f64 },
    /// Levels in `left` go left, those in `right` go right; any other level
    /// (unseen while fitting) follows the missing branch.
    Categorical { left: Vec<u32>, right: Vec<u32> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Left,
    Right,
    Missing,
}

impl SplitRule {
    pub fn route(&self, x: f64) -> Branch {
        if x.is_nan() {
            return Branch::Missing;
        }
        match self {
            SplitRule::Numeric { threshold } => {
                if x < *threshold {
                    Branch::Left
                } else {
                    Branch::Right
                }
            }
            SplitRule::Categorical { left, right } => {
                let l = x as u32;
                if left.contains(&l) {
                    Branch::Left
                } else if right.contains(&l) {
                    Branch::Right
                } else {
                    Branch::Missing
                }
            }
        }
    }
}

/// Largest number of observed levels for which a constrained categorical
/// split falls back to enumerating every subset.
pub const MAX_EXHAUSTIVE_LEVELS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub rule: SplitRule,
    /// Reduction of within-node squared error.
    pub improvement: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    n: f64,
    s: f64,
}

impl Acc {
    fn add(&mut self, r: f64) {
        self.n += 1.0;
        self.s += r;
    }
    fn score(&self) -> f64 {
        if self.n > 0.0 {
            self.s * self.s / self.n
        } else {
            0.0
        }
    }
}

/// Rows of one node. `sorted[j]` lists the node's rows with a non-missing value
/// of numeric feature `j`, in increasing order of that value.
#[derive(Debug, Clone)]
pub struct NodeRows {
    pub rows: Vec<u32>,
    pub sorted: Vec<Vec<u32>>,
}

impl NodeRows {
    /// Node holding `rows`, with per-feature orderings taken from the global
    /// `order` lists (which must cover every row).
    pub fn new(x: &FeatureMatrix, order: &[Vec<u32>], rows: Vec<u32>, n_total: usize) -> Self {
        let mut member = vec![false; n_total];
        for &r in &rows {
            member[r as usize] = true;
        }
        let sorted = order
            .iter()
            .zip(&x.features)
            .map(|(o, f)| match f.kind {
                CovariateKind::Numeric => {
                    o.iter().copied().filter(|&r| member[r as usize]).collect()
                }
                CovariateKind::Categorical => Vec::new(),
            })
            .collect();
        Self { rows, sorted }
    }

    /// Node holding `rows`, sorting each numeric feature directly.
    pub fn from_rows(x: &FeatureMatrix, rows: Vec<u32>) -> Self {
        let sorted = x
            .features
            .iter()
            .zip(&x.columns)
            .map(|(f, col)| match f.kind {
                CovariateKind::Numeric => {
                    let mut s: Vec<u32> = rows
                        .iter()
                        .copied()
                        .filter(|&r| !col[r as usize].is_nan())
                        .collect();
                    s.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                    s
                }
                CovariateKind::Categorical => Vec::new(),
            })
            .collect();
        Self { rows, sorted }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Splits into (left, right, missing) children preserving orderings.
    pub fn partition(
        &self,
        x: &FeatureMatrix,
        feature: usize,
        rule: &SplitRule,
        side: &mut [u8],
    ) -> [NodeRows; 3] {
        let col = &x.columns[feature];
        let mut rows: [Vec<u32>; 3] = Default::default();
        for &r in &self.rows {
            let b = rule.route(col[r as usize]) as usize;
            side[r as usize] = b as u8;
            rows[b].push(r);
        }
        let mut sorted: [Vec<Vec<u32>>; 3] = Default::default();
        for s in &self.sorted {
            let mut parts: [Vec<u32>; 3] = Default::default();
            for &r in s {
                parts[side[r as usize] as usize].push(r);
            }
            for (dst, p) in sorted.iter_mut().zip(parts) {
                dst.push(p);
            }
        }
        let [r0, r1, r2] = rows;
        let [s0, s1, s2] = sorted;
        [
            NodeRows {
                rows: r0,
                sorted: s0,
            },
            NodeRows {
                rows: r1,
                sorted: s1,
            },
            NodeRows {
                rows: r2,
                sorted: s2,
            },
        ]
    }
}

/// Best split of a node over all features, or `None` if no admissible rule
/// reduces the squared error. Ties keep the lowest feature index, then the
/// smallest threshold (or cut position for categorical features).
pub fn best_split(
    x: &FeatureMatrix,
    resid: &[f64],
    node: &NodeRows,
    min_obs_leaf: usize,
) -> Option<Split> {
    let mut total = Acc::default();
    let mut sumsq = 0.0;
    for &r in &node.rows {
        let v = resid[r as usize];
        total.add(v);
        sumsq += v * v;
    }
    let base = total.score();
    let min_gain = 1e-12 * sumsq.max(f64::MIN_POSITIVE);
    let min_obs = min_obs_leaf as f64;
    let mut best: Option<Split> = None;
    let mut best_gain = min_gain;

    for (j, f) in x.features.iter().enumerate() {
        let col = &x.columns[j];
        match f.kind {
            CovariateKind::Numeric => {
                let sorted = &node.sorted[j];
                let mut present = Acc::default();
                for &r in sorted {
                    present.add(resid[r as usize]);
                }
                let missing = Acc {
                    n: total.n - present.n,
                    s: total.s - present.s,
                };
                let mut left = Acc::default();
                for w in 0..sorted.len().saturating_sub(1) {
                    let r = sorted[w] as usize;
                    left.add(resid[r]);
                    let (xa, xb) = (col[r], col[sorted[w + 1] as usize]);
                    if xa == xb {
                        continue;
                    }
                    let right = Acc {
                        n: present.n - left.n,
                        s: present.s - left.s,
                    };
                    if left.n < min_obs || right.n < min_obs {
                        continue;
                    }
                    let gain = left.score() + right.score() + missing.score() - base;
                    if gain > best_gain {
                        let mut threshold = 0.5 * (xa + xb);
                        if threshold <= xa {
                            threshold = xb;
                        }
                        best_gain = gain;
                        best = Some(Split {
                            feature: j,
                            rule: SplitRule::Numeric { threshold },
                            improvement: gain,
                        });
                    }
                }
            }
            CovariateKind::Categorical => {
                let n_levels = f.levels.len();
                let mut by_level = vec![Acc::default(); n_levels];
                let mut missing = Acc::default();
                for &r in &node.rows {
                    let v = col[r as usize];
                    if v.is_nan() {
                        missing.add(resid[r as usize]);
                    } else {
                        by_level[v as usize].add(resid[r as usize]);
                    }
                }
                let mut levels: Vec<u32> = (0..n_levels as u32)
                    .filter(|&l| by_level[l as usize].n > 0.0)
                    .collect();
                // Ordering by mean response makes contiguous cuts optimal for squared loss.
                levels.sort_by(|&a, &b| {
                    let (ma, mb) = (by_level[a as usize], by_level[b as usize]);
                    (ma.s / ma.n).total_cmp(&(mb.s / mb.n)).then(a.cmp(&b))
                });
                let present = Acc {
                    n: total.n - missing.n,
                    s: total.s - missing.s,
                };
                let mut left = Acc::default();
                let mut constrained = false;
                for k in 0..levels.len().saturating_sub(1) {
                    let a = by_level[levels[k] as usize];
                    left.n += a.n;
                    left.s += a.s;
                    let right = Acc {
                        n: present.n - left.n,
                        s: present.s - left.s,
                    };
                    if left.n < min_obs || right.n < min_obs {
                        constrained = true;
                        continue;
                    }
                    let gain = left.score() + right.score() + missing.score() - base;
                    if gain > best_gain {
                        let mut l: Vec<u32> = levels[..=k].to_vec();
                        let mut rr: Vec<u32> = levels[k + 1..].to_vec();
                        l.sort_unstable();
                        rr.sort_unstable();
                        best_gain = gain;
                        best = Some(Split {
                            feature: j,
                            rule: SplitRule::Categorical { left: l, right: rr },
                            improvement: gain,
                        });
                    }
                }
                // The leaf-size floor can make a non-contiguous subset optimal.
                if constrained && levels.len() <= MAX_EXHAUSTIVE_LEVELS {
                    levels.sort_unstable();
                    let k = levels.len();
                    for mask in 1u32..(1 << (k - 1)) {
                        let mut left = Acc::default();
                        for (b, &l) in levels.iter().enumerate() {
                            if mask >> b & 1 == 1 {
                                let a = by_level[l as usize];
                                left.n += a.n;
                                left.s += a.s;
                            }
                        }
                        let right = Acc {
                            n: present.n - left.n,
                            s: present.s - left.s,
                        };
                        if left.n < min_obs || right.n < min_obs {
                            continue;
                        }
                        let gain = left.score() + right.score() + missing.score() - base;
                        if gain > best_gain * (1.0 + 1e-12) {
                            let (mut l, mut rr) = (Vec::new(), Vec::new());
                            for (b, &v) in levels.iter().enumerate() {
                                if mask >> b & 1 == 1 {
                                    l.push(v)
                                } else {
                                    rr.push(v)
                                }
                            }
                            best_gain = gain;
                            best = Some(Split {
                                feature: j,
                                rule: SplitRule::Categorical { left: l, right: rr },
                                improvement: gain,
                            });
                        }
                    }
                }
            }
        }
    }
    best
}
