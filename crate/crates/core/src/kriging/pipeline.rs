use super::system::Kriger;
use super::winsorize::{winsorize, WinsorizeResult};
use crate::error::Result;
use crate::ingest::{VariogramSettings, WinsorizeSettings};
use crate::variogram::{fit_residual_variogram, EmpiricalVariogram, MaternFit};

/// Residual geostatistics of one learning set: variogram, Winsorized
/// residuals, and the kriging system built on them.
#[derive(Debug, Clone)]
pub struct ResidualModel {
    pub empirical: EmpiricalVariogram,
    /// Fit to the raw residuals, before any Winsorizing.
    pub initial: MaternFit,
    pub winsorized: WinsorizeResult,
    pub kriger: Kriger,
}

pub fn fit_residual_model(
    coords: &[[f64; 2]],
    residuals: &[f64],
    epsilon: f64,
    variogram: &VariogramSettings,
    settings: &WinsorizeSettings,
) -> Result<ResidualModel> {
    let (empirical, initial) = fit_residual_variogram(coords, residuals, variogram)?;
    let refit = settings.refit_variogram.then_some(variogram);
    let winsorized = winsorize(coords, residuals, &initial.model, epsilon, settings, refit)?;
    let kriger = Kriger::new(coords, &winsorized.u_star(), &winsorized.model)?;
    Ok(ResidualModel {
        empirical,
        initial,
        winsorized,
        kriger,
    })
}
