//! Ordinary kriging of trend residuals, leave-one-out θ validation,
//! Winsorizing, and the lognormal back-transform.

mod loo;
mod output;
mod pipeline;
mod system;
mod winsorize;

pub use loo::{loo_theta, theta_intervals, LooKriger, LooOutput, ThetaStats, THETA_MEDIAN_TARGET};
pub use output::{write_predictions, write_winsorize_report, PredictionRow};
pub use pipeline::{fit_residual_model, ResidualModel};
pub use system::{krige_point, predict_lognormal, Kriger, KrigingPrediction};
pub use winsorize::{winsorize, WinsorizeResult, WinsorizedSite};
