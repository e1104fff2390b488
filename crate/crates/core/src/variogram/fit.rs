//! Weighted least-squares fit of a nugget + Matérn model to an empirical
//! variogram, with Cressie weights N_h / γ(h; θ)².

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use super::empirical::EmpiricalVariogram;
use super::matern::{matern_correlation, MaternModel, KAPPA_MAX, KAPPA_MIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Hold κ at this value instead of estimating it.
    pub fixed_kappa: Option<f64>,
    pub phi_min: f64,
    /// Defaults to twice the largest lag of the empirical variogram.
    pub phi_max: Option<f64>,
    pub max_iters: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fixed_kappa: None,
            phi_min: 1.0,
            phi_max: None,
            max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternFit {
    pub model: MaternModel,
    /// Weighted residual sum of squares at the optimum.
    pub objective: f64,
}

struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn clamp(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let mut excess = 0.0;
        let q = p
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| {
                let c = v.clamp(lo, hi);
                let span = hi - lo;
                excess += ((v - c) / span).powi(2);
                c
            })
            .collect();
        (q, excess)
    }
}

struct WlsProblem<'a> {
    lags: Vec<f64>,
    gammas: Vec<f64>,
    counts: Vec<f64>,
    fixed_kappa: Option<f64>,
    bounds: &'a Bounds,
    floor: f64,
}

impl WlsProblem<'_> {
    fn model_of(&self, p: &[f64]) -> MaternModel {
        MaternModel {
            c0: p[0],
            c1: p[1],
            phi: p[2]
                .exp()
                .clamp(self.bounds.lo[2].exp(), self.bounds.hi[2].exp()),
            kappa: self
                .fixed_kappa
                .unwrap_or_else(|| p[3].exp().clamp(KAPPA_MIN, KAPPA_MAX)),
        }
    }

    fn objective(&self, m: &MaternModel) -> f64 {
        let mut s = 0.0;
        for ((&h, &g), &n) in self.lags.iter().zip(&self.gammas).zip(&self.counts) {
            let model = m.c0 + m.c1 * (1.0 - matern_correlation(h / m.phi, m.kappa));
            let model = model.max(self.floor);
            let r = (g - model) / model;
            s += n * r * r;
        }
        s
    }
}

impl CostFunction for WlsProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let (q, excess) = self.bounds.clamp(p);
        let f = self.objective(&self.model_of(&q));
        Ok(if f.is_finite() {
            f * (1.0 + excess) + excess
        } else {
            f64::MAX
        })
    }
}

const N_DESCENTS: usize = 6;

/// Multi-start Nelder–Mead over (c0, c1, ln φ, ln κ). A 3×3×3×3 grid of
/// starting points (3×3×3 when κ is fixed) is screened by objective value and
/// the simplex is run from the best few. The best optimum is polished by
/// restarting the simplex around it.
pub fn fit_matern(emp: &EmpiricalVariogram, opts: &FitOptions) -> Result<MaternFit> {
    if emp.bins.len() < 4 {
        return Err(Error::FitFailed(format!(
            "need at least 4 lag bins, have {}",
            emp.bins.len()
        )));
    }
    let gmax = emp.bins.iter().map(|b| b.gamma).fold(0.0, f64::max);
    if !(gmax > 0.0) || !gmax.is_finite() {
        return Err(Error::FitFailed(
            "empirical variogram is identically zero".into(),
        ));
    }
    let max_lag = emp.max_lag();
    let phi_max = opts
        .phi_max
        .unwrap_or(2.0 * max_lag)
        .max(opts.phi_min * 1.0001);
    if let Some(k) = opts.fixed_kappa {
        if !(KAPPA_MIN..=KAPPA_MAX).contains(&k) {
            return Err(Error::Config(format!(
                "fixed kappa {k} outside [{KAPPA_MIN}, {KAPPA_MAX}]"
            )));
        }
    }
    let free_kappa = opts.fixed_kappa.is_none();
    let mut lo = vec![0.0, 0.0, opts.phi_min.ln()];
    let mut hi = vec![10.0 * gmax, 10.0 * gmax, phi_max.ln()];
    if free_kappa {
        lo.push(KAPPA_MIN.ln());
        hi.push(KAPPA_MAX.ln());
    }
    let bounds = Bounds { lo, hi };
    let problem = || WlsProblem {
        lags: emp.bins.iter().map(|b| b.mean_distance_km).collect(),
        gammas: emp.bins.iter().map(|b| b.gamma).collect(),
        counts: emp.bins.iter().map(|b| b.pair_count as f64).collect(),
        fixed_kappa: opts.fixed_kappa,
        bounds: &bounds,
        floor: 1e-12 * gmax,
    };

    let level = emp.bins.iter().map(|b| b.gamma).sum::<f64>() / emp.bins.len() as f64;
    let phi_lo = opts.phi_min.max(max_lag / 30.0).min(phi_max);
    let phi_hi = (max_lag / 2.0).clamp(phi_lo, phi_max);
    let phi_starts = [phi_lo, (phi_lo * phi_hi).sqrt(), phi_hi];
    let kappa_starts: &[f64] = if free_kappa {
        &[0.3, 1.0, 3.0]
    } else {
        &[f64::NAN]
    };

    let mut starts = Vec::new();
    for &f0 in &[0.1, 0.4, 0.7] {
        for &f1 in &[0.2, 0.6, 1.0] {
            for &phi in &phi_starts {
                for &k in kappa_starts {
                    let mut p = vec![f0 * level, f1 * level, phi.ln()];
                    if free_kappa {
                        p.push(k.ln());
                    }
                    starts.push(p);
                }
            }
        }
    }

    let run = |start: &[f64]| -> Option<(Vec<f64>, f64)> {
        let simplex = initial_simplex(start, level);
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).ok()?;
        let res = Executor::new(problem(), solver)
            .configure(|s| s.max_iters(opts.max_iters))
            .timer(false)
            .run()
            .ok()?;
        let state = res.state();
        let p = state.get_best_param()?.clone();
        let c = state.get_best_cost();
        c.is_finite().then_some((p, c))
    };

    // Screen the grid by objective value and only descend from the most
    // promising starts.
    let screen = problem();
    let mut ranked: Vec<(f64, Vec<f64>)> = starts
        .into_iter()
        .map(|p| (screen.cost(&p).unwrap_or(f64::MAX), p))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in ranked.iter().take(N_DESCENTS).map(|(_, p)| p) {
        if let Some((p, c)) = run(s) {
            if best.as_ref().is_none_or(|b| c < b.1) {
                best = Some((p, c));
            }
        }
    }
    let (mut p, mut c) =
        best.ok_or_else(|| Error::FitFailed("optimizer failed from every start".into()))?;
    for _ in 0..3 {
        let (q, _) = bounds.clamp(&p);
        match run(&q) {
            Some((p2, c2)) if c2 < c => {
                p = p2;
                c = c2;
            }
            _ => break,
        }
    }
    let (q, _) = bounds.clamp(&p);
    let prob = problem();
    let mut model = prob.model_of(&q);
    let objective = prob.objective(&model);

    // A structure that has fully decayed before the shortest lag cannot be told
    // apart from nugget.
    let h_min = emp.bins[0].mean_distance_km;
    if model.c1 > 0.0 && model.correlation(h_min) < 1e-6 {
        model.c0 += model.c1;
        model.c1 = 0.0;
    }
    model.validate().map_err(|_| {
        Error::FitFailed(format!(
            "best parameters {model:?} invalid (objective {objective})"
        ))
    })?;
    Ok(MaternFit { model, objective })
}

fn initial_simplex(start: &[f64], level: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![start.to_vec()];
    for i in 0..start.len() {
        let mut v = start.to_vec();
        v[i] += if i < 2 { 0.25 * level } else { 0.4 };
        simplex.push(v);
    }
    simplex
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variogram::{Estimator, LagBin};

    fn synthetic(m: &MaternModel, lags: &[f64], count: usize) -> EmpiricalVariogram {
        let w = lags[1] - lags[0];
        EmpiricalVariogram {
            estimator: Estimator::Matheron,
            bins: lags
                .iter()
                .map(|&h| LagBin {
                    lower_km: h - w / 2.0,
                    upper_km: h + w / 2.0,
                    mean_distance_km: h,
                    pair_count: count,
                    gamma: m.gamma(h).unwrap(),
                })
                .collect(),
        }
    }

    #[test]
    fn flat_variogram_is_pure_nugget() {
        let lags: Vec<f64> = (1..=15).map(|k| 10.0 * k as f64).collect();
        let emp = synthetic(&MaternModel::new(0.3, 0.0, 10.0, 0.5).unwrap(), &lags, 100);
        let fit = fit_matern(&emp, &FitOptions::default()).unwrap();
        assert!(fit.model.c1 <= 1e-3 * 0.3, "{:?}", fit.model);
        assert!((fit.model.c0 - 0.3).abs() < 1e-3 * 0.3);
    }

    #[test]
    fn too_few_bins() {
        let emp = synthetic(
            &MaternModel::new(0.3, 0.1, 10.0, 0.5).unwrap(),
            &[1.0, 2.0, 3.0],
            10,
        );
        assert!(matches!(
            fit_matern(&emp, &FitOptions::default()),
            Err(Error::FitFailed(_))
        ));
    }
}
