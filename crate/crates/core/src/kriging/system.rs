use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{collapse_duplicates, dist, Collapsed};
use crate::variogram::MaternModel;

/// Ordinary kriging estimate of a residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigingPrediction {
    pub u_hat: f64,
    /// Kriging variance.
    pub sigma2: f64,
    /// Lagrange multiplier of the semivariance-form system.
    pub psi: f64,
}

/// Factorized ordinary kriging system for one donor set and model.
///
/// The system is solved in covariance form, `Cλ + μ1 = c, 1ᵀλ = 1`, through a
/// Cholesky factor of `C`. Because `Γ = (c0 + c1)11ᵀ − C`, the semivariance
/// form `Γλ + ψ1 = γ₀` has the same weights with `ψ = −μ`.
#[derive(Debug, Clone)]
pub struct Kriger {
    model: MaternModel,
    donors: Collapsed,
    chol: Cholesky<f64, Dyn>,
    /// C⁻¹1 and 1ᵀC⁻¹1.
    b: DVector<f64>,
    s: f64,
}

pub(crate) fn covariance_matrix(coords: &[[f64; 2]], model: &MaternModel) -> DMatrix<f64> {
    let n = coords.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = model.sill();
        for j in 0..i {
            let v = model.covariance(dist(coords[i], coords[j]));
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

pub(crate) fn factor(coords: &[[f64; 2]], model: &MaternModel) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(covariance_matrix(coords, model)).ok_or_else(|| {
        Error::Numeric(format!(
            "kriging covariance of {} donors is not positive definite",
            coords.len()
        ))
    })
}

impl Kriger {
    pub fn new(coords: &[[f64; 2]], residuals: &[f64], model: &MaternModel) -> Result<Self> {
        if coords.len() != residuals.len() {
            return Err(Error::Validation(format!(
                "{} donor coordinates but {} residuals",
                coords.len(),
                residuals.len()
            )));
        }
        if coords.len() < 2 {
            return Err(Error::DegenerateGeometry(format!(
                "ordinary kriging needs at least 2 donors, got {}",
                coords.len()
            )));
        }
        if residuals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite donor residual".into()));
        }
        model.validate()?;
        if !(model.sill() > 0.0) {
            return Err(Error::DegenerateModel("zero-sill variogram".into()));
        }
        let donors = collapse_duplicates(coords, residuals);
        let chol = factor(&donors.coords, model)?;
        let b = chol.solve(&DVector::from_element(donors.coords.len(), 1.0));
        let s = b.sum();
        Ok(Self {
            model: *model,
            donors,
            chol,
            b,
            s,
        })
    }

    pub fn model(&self) -> &MaternModel {
        &self.model
    }

    /// Donor locations after merging exact duplicates.
    pub fn donor_coords(&self) -> &[[f64; 2]] {
        &self.donors.coords
    }

    pub fn donor_values(&self) -> &[f64] {
        &self.donors.values
    }

    fn solve(&self, target: [f64; 2]) -> (DVector<f64>, f64, f64) {
        let c = DVector::from_iterator(
            self.donors.coords.len(),
            self.donors
                .coords
                .iter()
                .map(|&d| self.model.covariance(dist(d, target))),
        );
        let a = self.chol.solve(&c);
        let mu = (a.sum() - 1.0) / self.s;
        let lambda = a - &self.b * mu;
        let sigma2 = self.model.sill() - lambda.dot(&c) - mu;
        (lambda, mu, sigma2)
    }

    /// Weights on the collapsed donors; they sum to one.
    pub fn weights(&self, target: [f64; 2]) -> Vec<f64> {
        self.solve(target).0.as_slice().to_vec()
    }

    pub fn predict(&self, target: [f64; 2]) -> KrigingPrediction {
        let (lambda, mu, sigma2) = self.solve(target);
        let u_hat = lambda
            .iter()
            .zip(&self.donors.values)
            .map(|(l, v)| l * v)
            .sum();
        KrigingPrediction {
            u_hat,
            // Rounding can leave a tiny negative variance at donor locations.
            sigma2: sigma2.max(0.0),
            psi: -mu,
        }
    }
}

/// Ordinary kriging of `residuals` at `target` with all donors.
pub fn krige_point(
    coords: &[[f64; 2]],
    residuals: &[f64],
    model: &MaternModel,
    target: [f64; 2],
) -> Result<KrigingPrediction> {
    Ok(Kriger::new(coords, residuals, model)?.predict(target))
}

/// Back-transformed prediction `exp(H + û + σ²/2 − ψ)` on the original scale.
pub fn predict_lognormal(brt_z: f64, kp: &KrigingPrediction) -> Result<f64> {
    let e = brt_z + kp.u_hat + 0.5 * kp.sigma2 - kp.psi;
    if !e.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite back-transform input (H = {brt_z}, {kp:?})"
        )));
    }
    Ok(e.exp())
}
