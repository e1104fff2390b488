use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, median, pearson};

/// Accuracy indices of predictions against observations, original units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mpe: f64,
    pub rmspe: f64,
    pub medpe: f64,
    pub rmedspe: f64,
    pub r2: f64,
    /// Infinite when the predictions are exact.
    pub rpiq: f64,
    /// Set when either vector has zero variance; `r2` is then 0.
    pub r2_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mpe,
    Rmspe,
    Medpe,
    Rmedspe,
    R2,
    Rpiq,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Mpe,
        Metric::Rmspe,
        Metric::Medpe,
        Metric::Rmedspe,
        Metric::R2,
        Metric::Rpiq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mpe => "mpe",
            Metric::Rmspe => "rmspe",
            Metric::Medpe => "medpe",
            Metric::Rmedspe => "rmedspe",
            Metric::R2 => "r2",
            Metric::Rpiq => "rpiq",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl MetricSet {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Mpe => self.mpe,
            Metric::Rmspe => self.rmspe,
            Metric::Medpe => self.medpe,
            Metric::Rmedspe => self.rmedspe,
            Metric::R2 => self.r2,
            Metric::Rpiq => self.rpiq,
        }
    }
}

/// Errors are `predicted − observed`. `iq_y` is the interquartile range of the
/// observed target over the whole dataset.
pub fn metrics(observed: &[f64], predicted: &[f64], iq_y: f64) -> Result<MetricSet> {
    if observed.is_empty() || observed.len() != predicted.len() {
        return Err(Error::Validation(format!(
            "metrics need equal non-empty vectors, got {} and {}",
            observed.len(),
            predicted.len()
        )));
    }
    if !(iq_y >= 0.0) || !iq_y.is_finite() {
        return Err(Error::Domain(format!(
            "interquartile range {iq_y} is not usable"
        )));
    }
    if observed.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite observation or prediction".into()));
    }
    let err: Vec<f64> = predicted.iter().zip(observed).map(|(p, o)| p - o).collect();
    let sq: Vec<f64> = err.iter().map(|e| e * e).collect();
    let rmspe = mean(&sq).sqrt();
    let (r2, r2_degenerate) = match pearson(predicted, observed) {
        Some(r) => (r * r, false),
        None => (0.0, true),
    };
    Ok(MetricSet {
        mpe: mean(&err),
        rmspe,
        medpe: median(&err),
        rmedspe: median(&sq).sqrt(),
        r2,
        rpiq: if rmspe > 0.0 {
            iq_y / rmspe
        } else {
            f64::INFINITY
        },
        r2_degenerate,
    })
}
