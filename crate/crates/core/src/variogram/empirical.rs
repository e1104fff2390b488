use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{dist, max_pair_distance};

/// 2.198 · median² / 2: the median of |d| for d ~ N(0, 2γ) is 0.6745·√(2γ).
pub const DOWD_CONSTANT: f64 = 2.198;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Matheron,
    Dowd,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Matheron => "matheron",
            Estimator::Dowd => "dowd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagBin {
    pub lower_km: f64,
    pub upper_km: f64,
    pub mean_distance_km: f64,
    pub pair_count: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub estimator: Estimator,
    pub bins: Vec<LagBin>,
}

impl EmpiricalVariogram {
    pub fn max_lag(&self) -> f64 {
        self.bins.last().map_or(0.0, |b| b.upper_km)
    }

    /// One bin per row: `lower_km,upper_km,mean_distance_km,pair_count,gamma`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record([
            "estimator",
            "lower_km",
            "upper_km",
            "mean_distance_km",
            "pair_count",
            "gamma",
        ])?;
        for b in &self.bins {
            w.write_record([
                self.estimator.to_string(),
                b.lower_km.to_string(),
                b.upper_km.to_string(),
                b.mean_distance_km.to_string(),
                b.pair_count.to_string(),
                b.gamma.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lag class edges; bin k covers `(edges[k], edges[k+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    pub edges: Vec<f64>,
}

impl Binning {
    pub fn equal_width(n_bins: usize, max_lag: f64) -> Result<Self> {
        if n_bins == 0 || !(max_lag > 0.0) {
            return Err(Error::Config(format!(
                "cannot build {n_bins} bins up to {max_lag} km"
            )));
        }
        let w = max_lag / n_bins as f64;
        Ok(Self {
            edges: (0..=n_bins).map(|k| k as f64 * w).collect(),
        })
    }

    /// `n_bins` equal-width bins up to `max_lag`, or half the largest inter-site distance.
    pub fn for_sites(coords: &[[f64; 2]], n_bins: usize, max_lag: Option<f64>) -> Result<Self> {
        let max_lag = match max_lag {
            Some(m) => m,
            None => {
                let d = max_pair_distance(coords);
                if d == 0.0 {
                    return Err(Error::DegenerateGeometry(
                        "all sites share one location".into(),
                    ));
                }
                0.5 * d
            }
        };
        Self::equal_width(n_bins, max_lag)
    }

    fn locate(&self, d: f64) -> Option<usize> {
        if d <= self.edges[0] || d > *self.edges.last().unwrap() {
            return None;
        }
        // First edge >= d closes the bin.
        let k = self.edges.partition_point(|&e| e < d);
        Some(k - 1)
    }
}

/// Experimental semivariogram of `values` observed at `coords`. Bins without
/// pairs are dropped; co-located pairs fall outside every bin.
pub fn empirical_variogram(
    coords: &[[f64; 2]],
    values: &[f64],
    binning: &Binning,
    estimator: Estimator,
) -> Result<EmpiricalVariogram> {
    assert_eq!(coords.len(), values.len());
    if coords.len() < 2 {
        return Err(Error::DegenerateGeometry("need at least two sites".into()));
    }
    let nb = binning.edges.len() - 1;
    let mut dsum = vec![0.0; nb];
    let mut count = vec![0usize; nb];
    let mut sq = vec![0.0; nb];
    let mut absdiff: Vec<Vec<f64>> = vec![Vec::new(); nb];
    let mut any_separated = false;
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            let d = dist(coords[i], coords[j]);
            any_separated |= d > 0.0;
            let Some(k) = binning.locate(d) else { continue };
            let diff = values[i] - values[j];
            dsum[k] += d;
            count[k] += 1;
            match estimator {
                Estimator::Matheron => sq[k] += diff * diff,
                Estimator::Dowd => absdiff[k].push(diff.abs()),
            }
        }
    }
    if !any_separated {
        return Err(Error::DegenerateGeometry(
            "all sites share one location".into(),
        ));
    }
    let bins = (0..nb)
        .filter(|&k| count[k] > 0)
        .map(|k| {
            let n = count[k] as f64;
            let gamma = match estimator {
                Estimator::Matheron => sq[k] / (2.0 * n),
                Estimator::Dowd => {
                    let med = crate::stats::median(&absdiff[k]);
                    DOWD_CONSTANT * med * med / 2.0
                }
            };
            LagBin {
                lower_km: binning.edges[k],
                upper_km: binning.edges[k + 1],
                mean_distance_km: dsum[k] / n,
                pair_count: count[k],
                gamma,
            }
        })
        .collect();
    Ok(EmpiricalVariogram { estimator, bins })
}
