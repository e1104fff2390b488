//! Outlier Winsorizing of residuals against leave-one-out kriging intervals,
//! with an allowance for relative measurement error of the target.

use serde::{Deserialize, Serialize};

use super::loo::{LooKriger, LooOutput, ThetaStats};
use crate::error::{Error, Result};
use crate::ingest::{VariogramSettings, WinsorizeSettings};
use crate::variogram::{fit_residual_variogram, MaternModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinsorizedSite {
    pub u: f64,
    pub u_minus: f64,
    pub u_plus: f64,
    pub u_star: f64,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinsorizeResult {
    pub sites: Vec<WinsorizedSite>,
    /// Interval half-width in kriging standard deviations; `None` when the
    /// residuals were already valid and nothing was adjusted.
    pub c: Option<f64>,
    pub iterations: usize,
    pub before: ThetaStats,
    pub after: ThetaStats,
    /// Model in force at the end (refitted when requested).
    pub model: MaternModel,
}

impl WinsorizeResult {
    pub fn n_flagged(&self) -> usize {
        self.sites.iter().filter(|s| s.flag).count()
    }

    pub fn u_star(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.u_star).collect()
    }
}

struct Pass<'a> {
    u: &'a [f64],
    base: &'a LooOutput,
    up: f64,
    down: f64,
}

impl Pass<'_> {
    fn apply(&self, c: f64) -> Vec<WinsorizedSite> {
        self.u
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let sd = self.base.sigma2[i].sqrt();
                let u_minus = self.base.u_hat[i] - c * sd;
                let u_plus = self.base.u_hat[i] + c * sd;
                let (u_star, flag) = if u + self.up < u_minus {
                    (u_minus, true)
                } else if u + self.down > u_plus {
                    (u_plus, true)
                } else {
                    (u, false)
                };
                WinsorizedSite {
                    u,
                    u_minus,
                    u_plus,
                    u_star,
                    flag,
                }
            })
            .collect()
    }
}

fn theta_of(loo: &LooKriger, sites: &[WinsorizedSite]) -> Result<ThetaStats> {
    let v: Vec<f64> = sites.iter().map(|s| s.u_star).collect();
    Ok(ThetaStats::from_thetas(&loo.run(&v)?.theta))
}

/// Scalar search for the `c` whose Winsorized data give θ̄ = 1.
fn search_c(loo: &LooKriger, pass: &Pass, s: &WinsorizeSettings) -> Result<(f64, ThetaStats)> {
    let eval = |c: f64| theta_of(loo, &pass.apply(c));
    let at_lo = eval(s.c_min)?;
    if at_lo.theta_bar >= 1.0 {
        return Ok((s.c_min, at_lo));
    }
    let at_hi = eval(s.c_max)?;
    if at_hi.theta_bar <= 1.0 {
        return Ok((s.c_max, at_hi));
    }
    let (mut lo, mut hi) = (s.c_min, s.c_max);
    let mut best = if (at_lo.theta_bar - 1.0).abs() < (at_hi.theta_bar - 1.0).abs() {
        (lo, at_lo)
    } else {
        (hi, at_hi)
    };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let t = eval(mid)?;
        if (t.theta_bar - 1.0).abs() < (best.1.theta_bar - 1.0).abs() {
            best = (mid, t);
        }
        if (t.theta_bar - 1.0).abs() <= s.theta_tol || hi - lo < 1e-12 {
            break;
        }
        if t.theta_bar < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Flags residuals lying outside `û₋ᵢ ± c·σ₋ᵢ` by more than the measurement
/// error allowance and pulls them to the nearer bound.
///
/// A site is flagged low when even `u + ln(1 + ε)` falls under the lower
/// bound, and high when even `u + ln(1 − ε)` exceeds the upper bound. `c` is
/// chosen in `[c_min, c_max]` so that the adjusted residuals have θ̄ closest
/// to 1. Intervals are then recomputed from the adjusted residuals (with the
/// variogram refitted if `refit` is given) until the flagged set repeats.
pub fn winsorize(
    coords: &[[f64; 2]],
    residuals: &[f64],
    model: &MaternModel,
    epsilon: f64,
    settings: &WinsorizeSettings,
    refit: Option<&VariogramSettings>,
) -> Result<WinsorizeResult> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    if coords.len() != residuals.len() {
        return Err(Error::Validation(
            "coordinate and residual counts differ".into(),
        ));
    }
    if coords.len() < 10 {
        return Err(Error::DegenerateGeometry(format!(
            "Winsorizing needs at least 10 sites, got {}",
            coords.len()
        )));
    }
    let mut model = *model;
    let mut loo = LooKriger::new(coords, &model)?;
    let mut base = loo.run(residuals)?;
    let before = ThetaStats::from_thetas(&base.theta);
    if before.is_valid() {
        let pass = Pass {
            u: residuals,
            base: &base,
            up: 0.0,
            down: 0.0,
        };
        let sites = pass
            .apply(settings.c_max)
            .into_iter()
            .map(|s| WinsorizedSite {
                u_star: s.u,
                flag: false,
                ..s
            })
            .collect();
        return Ok(WinsorizeResult {
            sites,
            c: None,
            iterations: 0,
            before,
            after: before,
            model,
        });
    }

    let up = (1.0 + epsilon).ln();
    let down = (1.0 - epsilon).ln();
    let mut prev_flags: Option<Vec<bool>> = None;
    let mut iterations = 0;
    let (sites, c, after) = loop {
        iterations += 1;
        let pass = Pass {
            u: residuals,
            base: &base,
            up,
            down,
        };
        let (c, after) = search_c(&loo, &pass, settings)?;
        let sites = pass.apply(c);
        let flags: Vec<bool> = sites.iter().map(|s| s.flag).collect();
        if prev_flags.as_ref() == Some(&flags) || iterations >= settings.max_iter {
            break (sites, c, after);
        }
        prev_flags = Some(flags);
        let adjusted: Vec<f64> = sites.iter().map(|s| s.u_star).collect();
        if let Some(vs) = refit {
            model = fit_residual_variogram(coords, &adjusted, vs)?.1.model;
            loo = LooKriger::new(coords, &model)?;
        }
        base = loo.run(&adjusted)?;
    };

    if !after.is_valid() {
        let n_flag = sites.iter().filter(|s| s.flag).count();
        return Err(Error::WinsorizeFailed(format!(
            "no c in [{}, {}] gives a valid model: c = {c:.4}, {n_flag} flagged, \
             θ̄ = {:.4} (interval {:.4}..{:.4}), θ̆ = {:.4} (interval {:.4}..{:.4}) after {iterations} iterations",
            settings.c_min,
            settings.c_max,
            after.theta_bar,
            after.theta_bar_ci.0,
            after.theta_bar_ci.1,
            after.theta_med,
            after.theta_med_ci.0,
            after.theta_med_ci.1,
        )));
    }
    Ok(WinsorizeResult {
        sites,
        c: Some(c),
        iterations,
        before,
        after,
        model,
    })
}
