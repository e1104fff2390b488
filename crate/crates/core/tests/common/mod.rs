//! Independent oracles shared by the integration test targets.
#![allow(dead_code)]

use brtkrige::brt::{Branch, FeatureMatrix, Split};
use brtkrige::geom::dist;
use brtkrige::variogram::MaternModel;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Weights, ψ and σ² from the bordered semivariance system
/// [Γ 1; 1ᵀ 0][λ; ψ] = [γ₀; 1], σ² = λᵀγ₀ + ψ.
pub fn kriging_oracle(
    coords: &[[f64; 2]],
    model: &MaternModel,
    target: [f64; 2],
) -> (Vec<f64>, f64, f64) {
    let n = coords.len();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    let mut b = vec![0.0; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = model.gamma(dist(coords[i], coords[j])).unwrap();
        }
        a[i][n] = 1.0;
        a[n][i] = 1.0;
        b[i] = model.gamma(dist(coords[i], target)).unwrap();
    }
    b[n] = 1.0;
    let x = gauss_solve(a, b.clone());
    let lambda = x[..n].to_vec();
    let psi = x[n];
    let sigma2 = lambda.iter().zip(&b[..n]).map(|(l, g)| l * g).sum::<f64>() + psi;
    (lambda, psi, sigma2)
}

pub fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum()
}

/// Within-node SSE of a ternary partition given a routing function.
pub fn partition_sse(
    col: &[f64],
    resid: &[f64],
    route: impl Fn(f64) -> Option<bool>,
) -> (f64, usize, usize) {
    let (mut l, mut r, mut m) = (vec![], vec![], vec![]);
    for (&x, &e) in col.iter().zip(resid) {
        match route(x) {
            Some(true) => l.push(e),
            Some(false) => r.push(e),
            None => m.push(e),
        }
    }
    (sse(&l) + sse(&r) + sse(&m), l.len(), r.len())
}

/// Minimum SSE over every admissible numeric threshold and every categorical
/// subset split of every feature.
pub fn brute_force_min(x: &FeatureMatrix, resid: &[f64], min_obs: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |s: f64, nl: usize, nr: usize| {
        if nl >= min_obs && nr >= min_obs && best.is_none_or(|b| s < b) {
            best = Some(s);
        }
    };
    for (j, f) in x.features.iter().enumerate() {
        let col = &x.columns[j];
        if f.levels.is_empty() {
            let mut vals: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let (s, nl, nr) =
                    partition_sse(col, resid, |v| if v.is_nan() { None } else { Some(v < t) });
                consider(s, nl, nr);
            }
        } else {
            let mut present: Vec<u32> = col
                .iter()
                .filter(|v| !v.is_nan())
                .map(|&v| v as u32)
                .collect();
            present.sort_unstable();
            present.dedup();
            let k = present.len();
            for mask in 1..(1u32 << k).saturating_sub(1) {
                let left: Vec<u32> = (0..k)
                    .filter(|b| mask >> b & 1 == 1)
                    .map(|b| present[b])
                    .collect();
                let (s, nl, nr) = partition_sse(col, resid, |v| {
                    if v.is_nan() {
                        None
                    } else {
                        Some(left.contains(&(v as u32)))
                    }
                });
                consider(s, nl, nr);
            }
        }
    }
    best
}

pub fn chosen_sse(x: &FeatureMatrix, resid: &[f64], s: &Split) -> f64 {
    let col = &x.columns[s.feature];
    partition_sse(col, resid, |v| match s.rule.route(v) {
        Branch::Left => Some(true),
        Branch::Right => Some(false),
        Branch::Missing => None,
    })
    .0
}
