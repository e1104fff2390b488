//! Leave-one-out kriging diagnostics.
//!
//! With `Q = C⁻¹ − C⁻¹11ᵀC⁻¹ / 1ᵀC⁻¹1`, the ordinary kriging error at donor
//! `i` when it is left out is `(Qu)ᵢ / Qᵢᵢ` and its kriging variance is
//! `1 / Qᵢᵢ`, so one factorization serves every site.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use super::system::factor;
use crate::error::{Error, Result};
use crate::geom::{collapse_duplicates, Collapsed};
use crate::stats::{chi2_1_quantile, mean, median};
use crate::variogram::MaternModel;

/// Median of the χ²₁ distribution.
pub const THETA_MEDIAN_TARGET: f64 = 0.454_936_423_119_572_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaStats {
    pub theta_bar: f64,
    pub theta_med: f64,
    pub n: usize,
    /// 95% interval for the mean under a valid model.
    pub theta_bar_ci: (f64, f64),
    /// 95% interval for the median under a valid model.
    pub theta_med_ci: (f64, f64),
}

impl ThetaStats {
    pub fn from_thetas(theta: &[f64]) -> Self {
        let n = theta.len();
        let (theta_bar_ci, theta_med_ci) = theta_intervals(n);
        Self {
            theta_bar: mean(theta),
            theta_med: median(theta),
            n,
            theta_bar_ci,
            theta_med_ci,
        }
    }

    pub fn mean_ok(&self) -> bool {
        (self.theta_bar_ci.0..=self.theta_bar_ci.1).contains(&self.theta_bar)
    }

    pub fn median_ok(&self) -> bool {
        (self.theta_med_ci.0..=self.theta_med_ci.1).contains(&self.theta_med)
    }

    pub fn is_valid(&self) -> bool {
        self.mean_ok() && self.median_ok()
    }
}

/// 95% intervals for the mean and median of `n` independent χ²₁ draws. The
/// mean uses a normal approximation with variance 2/n. The median uses the
/// Beta law of the middle order statistic's probability level, mapped through
/// the χ²₁ quantile function.
pub fn theta_intervals(n: usize) -> ((f64, f64), (f64, f64)) {
    let nf = n as f64;
    let h = 1.959_963_984_540_054 * (2.0 / nf).sqrt();
    let k = 0.5 * (nf + 1.0);
    let beta = Beta::new(k, nf - k + 1.0).expect("valid beta parameters");
    let lo = chi2_1_quantile(beta.inverse_cdf(0.025));
    let hi = chi2_1_quantile(beta.inverse_cdf(0.975));
    ((1.0 - h, 1.0 + h), (lo, hi))
}

/// Per-site leave-one-out results.
#[derive(Debug, Clone, PartialEq)]
pub struct LooOutput {
    /// Prediction of each site's residual from all other locations.
    pub u_hat: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Squared standardized errors, one per distinct location.
    pub theta: Vec<f64>,
}

/// Reusable leave-one-out operator for fixed sites and model. Sites sharing
/// coordinates are merged and left out together.
#[derive(Debug, Clone)]
pub struct LooKriger {
    groups: Collapsed,
    q: DMatrix<f64>,
}

impl LooKriger {
    pub fn new(coords: &[[f64; 2]], model: &MaternModel) -> Result<Self> {
        model.validate()?;
        let groups = collapse_duplicates(coords, &vec![0.0; coords.len()]);
        let m = groups.coords.len();
        if m < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "leave-one-out kriging needs at least 3 distinct locations, got {m}"
            )));
        }
        let chol = factor(&groups.coords, model)?;
        let cinv = chol.inverse();
        let b = &cinv * DVector::from_element(m, 1.0);
        let s = b.sum();
        let q = cinv - (&b * b.transpose()) / s;
        Ok(Self { groups, q })
    }

    pub fn n_locations(&self) -> usize {
        self.groups.coords.len()
    }

    pub fn run(&self, residuals: &[f64]) -> Result<LooOutput> {
        assert_eq!(residuals.len(), self.groups.group_of.len());
        let m = self.n_locations();
        let mut v = vec![0.0; m];
        for (&g, &r) in self.groups.group_of.iter().zip(residuals) {
            v[g] += r;
        }
        for (x, &k) in v.iter_mut().zip(&self.groups.group_sizes) {
            *x /= k as f64;
        }
        let qu = &self.q * DVector::from_vec(v.clone());
        let mut pred = vec![0.0; m];
        let mut var = vec![0.0; m];
        let mut theta = vec![0.0; m];
        for i in 0..m {
            let qii = self.q[(i, i)];
            if !(qii > 0.0) || !qii.is_finite() {
                return Err(Error::DegenerateModel(format!(
                    "zero leave-one-out kriging variance at location {i}"
                )));
            }
            let e = qu[i] / qii;
            pred[i] = v[i] - e;
            var[i] = 1.0 / qii;
            theta[i] = e * e * qii;
        }
        let per_site = |x: &[f64]| self.groups.group_of.iter().map(|&g| x[g]).collect();
        Ok(LooOutput {
            u_hat: per_site(&pred),
            sigma2: per_site(&var),
            theta,
        })
    }
}

/// θ statistics of `residuals` under `model`.
pub fn loo_theta(
    coords: &[[f64; 2]],
    residuals: &[f64],
    model: &MaternModel,
) -> Result<ThetaStats> {
    if coords.len() != residuals.len() {
        return Err(Error::Validation(
            "coordinate and residual counts differ".into(),
        ));
    }
    if coords.len() < 10 {
        return Err(Error::DegenerateGeometry(format!(
            "θ validation needs at least 10 sites, got {}",
            coords.len()
        )));
    }
    let out = LooKriger::new(coords, model)?.run(residuals)?;
    Ok(ThetaStats::from_thetas(&out.theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_target_is_chi2_median() {
        assert!((chi2_1_quantile(0.5) - THETA_MEDIAN_TARGET).abs() < 1e-12);
    }

    #[test]
    fn intervals_shrink_with_n() {
        let (a, b) = theta_intervals(100);
        let (c, d) = theta_intervals(1000);
        assert!(a.0 < c.0 && a.1 > c.1);
        assert!(b.0 < d.0 && b.1 > d.1);
        assert!(d.0 < THETA_MEDIAN_TARGET && THETA_MEDIAN_TARGET < d.1);
        assert!((c.1 - 1.0 - 1.96 * (0.002f64).sqrt()).abs() < 1e-4);
    }
}
