//! Regression kriging of soil organic carbon stocks: stochastic gradient boosted
//! regression trees for the trend, robust residual geostatistics (Dowd
//! variography, Matérn fitting, Winsorizing, lognormal ordinary kriging), and a
//! Monte Carlo cross-validation harness for comparing model configurations.

pub mod brt;
pub mod error;
pub mod geom;
pub mod ingest;
pub mod kriging;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod validation;
pub mod variogram;

pub use error::{Error, ErrorCategory, Result};
