//! Residual variography: empirical estimators, the Matérn model and its fit.

mod bessel;
mod empirical;
mod fit;
mod matern;

pub use bessel::bessel_k;
pub use empirical::{
    empirical_variogram, Binning, EmpiricalVariogram, Estimator, LagBin, DOWD_CONSTANT,
};
pub use fit::{fit_matern, FitOptions, MaternFit};
pub use matern::{matern_correlation, MaternModel, KAPPA_MAX, KAPPA_MIN};

/// c1 / (c0 + c1) of a fitted model.
pub fn spatial_dependence(model: &MaternModel) -> crate::error::Result<f64> {
    model.spatial_dependence()
}

/// Empirical variogram and fitted model for residuals `values` at `coords`.
/// Exact-coordinate duplicates are averaged first.
pub fn fit_residual_variogram(
    coords: &[[f64; 2]],
    values: &[f64],
    settings: &crate::ingest::VariogramSettings,
) -> crate::error::Result<(EmpiricalVariogram, MaternFit)> {
    let c = crate::geom::collapse_duplicates(coords, values);
    let binning = Binning::for_sites(&c.coords, settings.bins, settings.max_lag_km)?;
    let emp = empirical_variogram(&c.coords, &c.values, &binning, settings.estimator)?;
    let opts = FitOptions {
        fixed_kappa: settings.fixed_kappa,
        ..FitOptions::default()
    };
    let fit = fit_matern(&emp, &opts)?;
    Ok((emp, fit))
}
