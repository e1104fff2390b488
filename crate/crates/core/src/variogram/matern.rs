use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::bessel::bessel_k;
use crate::error::{Error, Result};

pub const KAPPA_MIN: f64 = 0.05;
pub const KAPPA_MAX: f64 = 10.0;

/// Nugget plus one Matérn structure, in log-target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternModel {
    /// Nugget variance.
    pub c0: f64,
    /// Partial sill.
    pub c1: f64,
    /// Distance parameter, km.
    pub phi: f64,
    /// Smoothness.
    pub kappa: f64,
}

impl MaternModel {
    pub fn new(c0: f64, c1: f64, phi: f64, kappa: f64) -> Result<Self> {
        let m = Self { c0, c1, phi, kappa };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.c0.is_finite()
            && self.c1.is_finite()
            && self.c0 >= 0.0
            && self.c1 >= 0.0
            && self.phi > 0.0
            && self.phi.is_finite()
            && (KAPPA_MIN..=KAPPA_MAX).contains(&self.kappa);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Matérn parameters {self:?}")))
        }
    }

    pub fn sill(&self) -> f64 {
        self.c0 + self.c1
    }

    /// Matérn correlation ρ(h) of the structured component, ρ(0) = 1.
    pub fn correlation(&self, h: f64) -> f64 {
        matern_correlation(h / self.phi, self.kappa)
    }

    /// γ(h) = c0 + c1(1 − ρ(h)) for h > 0 and γ(0) = 0.
    pub fn gamma(&self, h: f64) -> Result<f64> {
        if !(h >= 0.0) {
            return Err(Error::Domain(format!("negative lag {h}")));
        }
        Ok(self.gamma_at(h))
    }

    pub(crate) fn gamma_at(&self, h: f64) -> f64 {
        if h == 0.0 {
            0.0
        } else {
            self.c0 + self.c1 * (1.0 - self.correlation(h))
        }
    }

    /// Covariance C(h) = sill − γ(h); the nugget only appears at zero lag.
    pub fn covariance(&self, h: f64) -> f64 {
        if h == 0.0 {
            self.sill()
        } else {
            self.c1 * self.correlation(h)
        }
    }

    /// c1 / (c0 + c1).
    pub fn spatial_dependence(&self) -> Result<f64> {
        let s = self.sill();
        if !(s > 0.0) {
            return Err(Error::Domain(
                "spatial dependence undefined for zero sill".into(),
            ));
        }
        Ok(self.c1 / s)
    }

    /// Distance at which the structured component has reached `fraction` of the
    /// partial sill, i.e. ρ(h) = 1 − fraction.
    pub fn practical_range(&self, fraction: f64) -> f64 {
        let target = 1.0 - fraction;
        let (mut lo, mut hi) = (0.0, self.phi);
        while self.correlation(hi) > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.correlation(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Multiplies nugget and partial sill by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            c0: self.c0 * s,
            c1: self.c1 * s,
            ..*self
        }
    }
}

/// ρ(t) = 2^{1−κ}/Γ(κ) · t^κ · K_κ(t) at scaled distance t = h/φ.
pub fn matern_correlation(t: f64, kappa: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if kappa == 0.5 {
        return (-t).exp();
    }
    let k = bessel_k(kappa, t);
    if k == 0.0 {
        return 0.0;
    }
    let ln_rho = (1.0 - kappa) * std::f64::consts::LN_2 - ln_gamma(kappa) + kappa * t.ln() + k.ln();
    ln_rho.exp().clamp(0.0, 1.0)
}
