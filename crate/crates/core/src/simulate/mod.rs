//! Synthetic datasets with known structure: covariate-driven trends plus a
//! Gaussian random field drawn exactly from a Matérn covariance.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::dist;
use crate::ingest::{CovValue, CovariateDef, CovariateSchema, Dataset, SiteRecord};
use crate::rng::stream;
use crate::variogram::MaternModel;

pub const MAX_SITES: usize = 5000;
const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Layout {
    /// `nx × ny` nodes of a square grid with its corner at the origin.
    Grid {
        spacing_km: f64,
        nx: usize,
        ny: usize,
    },
    /// `n` points uniform in `[0, width] × [0, height]`.
    Random {
        n: usize,
        width_km: f64,
        height_km: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovariateGen {
    Uniform {
        name: String,
        low: f64,
        high: f64,
    },
    /// Zero-mean Gaussian field with covariance `variance · ρ(h; φ, κ)`.
    Field {
        name: String,
        variance: f64,
        phi: f64,
        kappa: f64,
    },
    Categorical {
        name: String,
        levels: Vec<String>,
    },
}

impl CovariateGen {
    pub fn name(&self) -> &str {
        match self {
            CovariateGen::Uniform { name, .. }
            | CovariateGen::Field { name, .. }
            | CovariateGen::Categorical { name, .. } => name,
        }
    }
}

/// One additive trend term on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Effect {
    Linear {
        covariate: String,
        slope: f64,
    },
    Step {
        covariate: String,
        threshold: f64,
        below: f64,
        above: f64,
    },
    Sine {
        covariate: String,
        amplitude: f64,
        period: f64,
    },
    /// One value per level of a categorical covariate.
    Levels {
        covariate: String,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contamination {
    pub fraction: f64,
    /// Multiplier applied to the target on the original scale.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub seed: u64,
    pub layout: Layout,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub covariates: Vec<CovariateGen>,
    #[serde(default)]
    pub trend: Vec<Effect>,
    /// Residual structure: nugget noise `c0` plus a field with partial sill `c1`.
    pub residual: MaternModel,
    /// Emit `exp(z)` as the target rather than `z`.
    #[serde(default = "yes")]
    pub lognormal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contamination: Option<Contamination>,
}

fn yes() -> bool {
    true
}

impl SimSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: SimSpec = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_sites(&self) -> usize {
        match self.layout {
            Layout::Grid { nx, ny, .. } => nx * ny,
            Layout::Random { n, .. } => n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self.layout {
            Layout::Grid { spacing_km, nx, ny } => {
                if !(spacing_km > 0.0) || nx == 0 || ny == 0 {
                    return bad("grid layout needs positive spacing and counts".into());
                }
            }
            Layout::Random {
                n,
                width_km,
                height_km,
            } => {
                if n == 0 || !(width_km > 0.0) || !(height_km > 0.0) {
                    return bad("random layout needs a positive count and box".into());
                }
            }
        }
        if self.n_sites() > MAX_SITES {
            return bad(format!(
                "at most {MAX_SITES} sites can be simulated, asked for {}",
                self.n_sites()
            ));
        }
        self.residual.validate()?;
        if let Some(c) = self.contamination {
            if !(0.0..=0.2).contains(&c.fraction) || !(c.magnitude > 0.0) {
                return bad(
                    "contamination fraction must lie in [0, 0.2] and magnitude be positive".into(),
                );
            }
        }
        for (i, g) in self.covariates.iter().enumerate() {
            if self.covariates[..i].iter().any(|o| o.name() == g.name()) {
                return bad(format!("duplicate simulated covariate `{}`", g.name()));
            }
            match g {
                CovariateGen::Uniform { low, high, .. } if !(low < high) => {
                    return bad(format!("`{}`: need low < high", g.name()))
                }
                CovariateGen::Field {
                    variance,
                    phi,
                    kappa,
                    ..
                } => {
                    MaternModel::new(0.0, *variance, *phi, *kappa)?;
                }
                CovariateGen::Categorical { levels, .. } if levels.is_empty() => {
                    return bad(format!("`{}` has no levels", g.name()))
                }
                _ => {}
            }
        }
        for e in &self.trend {
            let (name, want_levels) = match e {
                Effect::Linear { covariate, .. }
                | Effect::Step { covariate, .. }
                | Effect::Sine { covariate, .. } => (covariate, None),
                Effect::Levels { covariate, values } => (covariate, Some(values.len())),
            };
            match (
                self.covariates.iter().find(|g| g.name() == name),
                want_levels,
            ) {
                (None, _) => return bad(format!("trend refers to unknown covariate `{name}`")),
                (Some(CovariateGen::Categorical { levels, .. }), Some(k)) if levels.len() == k => {}
                (Some(CovariateGen::Categorical { .. }), _) => {
                    return bad(format!(
                        "`{name}` is categorical and needs one value per level"
                    ))
                }
                (Some(_), Some(_)) => return bad(format!("`{name}` is not categorical")),
                (Some(_), None) => {}
            }
        }
        Ok(())
    }
}

/// Cholesky factor of a Matérn covariance at fixed locations, reusable for
/// many independent draws.
#[derive(Debug, Clone)]
pub struct GrfSampler {
    chol: Cholesky<f64, Dyn>,
}

impl GrfSampler {
    /// Field with covariance `c1 · ρ(h)`; the nugget of `model` is ignored.
    pub fn new(coords: &[[f64; 2]], model: &MaternModel) -> Result<Self> {
        model.validate()?;
        let n = coords.len();
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            c[(i, i)] = model.c1;
            for j in 0..i {
                let v = model.c1 * model.correlation(dist(coords[i], coords[j]));
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        let chol = match Cholesky::new(c.clone()) {
            Some(ch) => ch,
            None => {
                for i in 0..n {
                    c[(i, i)] += JITTER * model.c1.max(f64::MIN_POSITIVE);
                }
                Cholesky::new(c).ok_or_else(|| {
                    Error::Numeric(
                        "simulation covariance not positive definite after jitter".into(),
                    )
                })?
            }
        };
        Ok(Self { chol })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.chol.l_dirty().nrows();
        let w = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (self.chol.l() * w).as_slice().to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub site_id: String,
    pub trend: f64,
    pub grf: f64,
    pub nugget: f64,
    pub contaminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: Dataset,
    pub truth: Vec<GroundTruth>,
}

impl Simulation {
    /// Log-scale value before contamination.
    pub fn z(&self) -> Vec<f64> {
        self.truth
            .iter()
            .map(|t| t.trend + t.grf + t.nugget)
            .collect()
    }
}

pub fn site_layout(layout: &Layout, seed: u64) -> Vec<[f64; 2]> {
    match *layout {
        Layout::Grid { spacing_km, nx, ny } => (0..ny)
            .flat_map(|j| (0..nx).map(move |i| [i as f64 * spacing_km, j as f64 * spacing_km]))
            .collect(),
        Layout::Random {
            n,
            width_km,
            height_km,
        } => {
            let mut rng = stream(seed, &[1]);
            (0..n)
                .map(|_| {
                    [
                        rng.random_range(0.0..width_km),
                        rng.random_range(0.0..height_km),
                    ]
                })
                .collect()
        }
    }
}

fn numeric_column<'a>(names: &[&str], cols: &'a [Vec<f64>], name: &str) -> &'a [f64] {
    let j = names
        .iter()
        .position(|n| *n == name)
        .expect("validated covariate");
    &cols[j]
}

pub fn simulate_field(spec: &SimSpec) -> Result<Simulation> {
    spec.validate()?;
    let coords = site_layout(&spec.layout, spec.seed);
    let n = coords.len();

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(spec.covariates.len());
    let mut defs = Vec::with_capacity(spec.covariates.len());
    for (j, g) in spec.covariates.iter().enumerate() {
        let mut rng = stream(spec.seed, &[2, j as u64]);
        let col = match g {
            CovariateGen::Uniform { name, low, high } => {
                defs.push(CovariateDef::numeric(name.clone()));
                (0..n).map(|_| rng.random_range(*low..*high)).collect()
            }
            CovariateGen::Field {
                name,
                variance,
                phi,
                kappa,
            } => {
                defs.push(CovariateDef::numeric(name.clone()));
                let m = MaternModel::new(0.0, *variance, *phi, *kappa)?;
                GrfSampler::new(&coords, &m)?.sample(&mut rng)
            }
            CovariateGen::Categorical { name, levels } => {
                defs.push(CovariateDef::categorical(name.clone(), levels.clone()));
                (0..n)
                    .map(|_| rng.random_range(0..levels.len()) as f64)
                    .collect()
            }
        };
        cols.push(col);
    }
    let names: Vec<&str> = spec.covariates.iter().map(|g| g.name()).collect();

    let mut trend = vec![spec.intercept; n];
    for e in &spec.trend {
        match e {
            Effect::Linear { covariate, slope } => {
                for (t, x) in trend
                    .iter_mut()
                    .zip(numeric_column(&names, &cols, covariate))
                {
                    *t += slope * x;
                }
            }
            Effect::Step {
                covariate,
                threshold,
                below,
                above,
            } => {
                for (t, x) in trend
                    .iter_mut()
                    .zip(numeric_column(&names, &cols, covariate))
                {
                    *t += if x < threshold { *below } else { *above };
                }
            }
            Effect::Sine {
                covariate,
                amplitude,
                period,
            } => {
                for (t, x) in trend
                    .iter_mut()
                    .zip(numeric_column(&names, &cols, covariate))
                {
                    *t += amplitude * (std::f64::consts::TAU * x / period).sin();
                }
            }
            Effect::Levels { covariate, values } => {
                for (t, x) in trend
                    .iter_mut()
                    .zip(numeric_column(&names, &cols, covariate))
                {
                    *t += values[*x as usize];
                }
            }
        }
    }

    let grf = if spec.residual.c1 > 0.0 {
        GrfSampler::new(&coords, &spec.residual)?.sample(&mut stream(spec.seed, &[3]))
    } else {
        vec![0.0; n]
    };
    let nugget_sd = spec.residual.c0.sqrt();
    let mut rng = stream(spec.seed, &[4]);
    let nugget: Vec<f64> = (0..n)
        .map(|_| nugget_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut contaminated = vec![false; n];
    if let Some(c) = spec.contamination {
        let k = (c.fraction * n as f64).round() as usize;
        let mut idx: Vec<usize> = (0..n).collect();
        let (chosen, _) = idx.partial_shuffle(&mut stream(spec.seed, &[5]), k);
        for &i in chosen.iter() {
            contaminated[i] = true;
        }
    }
    let magnitude = spec.contamination.map_or(1.0, |c| c.magnitude);

    let width = n.to_string().len().max(4);
    let schema = CovariateSchema::new(defs)?;
    let mut records = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let site_id = format!("S{:0width$}", i + 1);
        let z = trend[i] + grf[i] + nugget[i];
        let mut y = if spec.lognormal { z.exp() } else { z };
        if contaminated[i] {
            y *= magnitude;
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain(format!(
                "simulated target {y} at `{site_id}` is not a positive stock; enable lognormal or raise the intercept"
            )));
        }
        let covariates = spec
            .covariates
            .iter()
            .zip(&cols)
            .map(|(g, col)| match g {
                CovariateGen::Categorical { .. } => CovValue::Level(col[i] as u32),
                _ => CovValue::Numeric(col[i]),
            })
            .collect();
        records.push(SiteRecord {
            site_id: site_id.clone(),
            x_km: coords[i][0],
            y_km: coords[i][1],
            target: Some(y),
            covariates,
        });
        truth.push(GroundTruth {
            site_id,
            trend: trend[i],
            grf: grf[i],
            nugget: nugget[i],
            contaminated: contaminated[i],
        });
    }
    Ok(Simulation {
        dataset: Dataset { schema, records },
        truth,
    })
}

pub fn write_ground_truth<W: Write>(w: W, truth: &[GroundTruth]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for t in truth {
        out.serialize(t)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SimSpec {
        SimSpec {
            seed: 7,
            layout: Layout::Grid {
                spacing_km: 16.0,
                nx: 10,
                ny: 10,
            },
            intercept: 1.5,
            covariates: vec![
                CovariateGen::Uniform {
                    name: "elev".into(),
                    low: 0.0,
                    high: 1.0,
                },
                CovariateGen::Categorical {
                    name: "lu".into(),
                    levels: vec!["crop".into(), "forest".into()],
                },
            ],
            trend: vec![
                Effect::Linear {
                    covariate: "elev".into(),
                    slope: 0.5,
                },
                Effect::Levels {
                    covariate: "lu".into(),
                    values: vec![0.0, 0.4],
                },
            ],
            residual: MaternModel::new(0.05, 0.1, 40.0, 0.5).unwrap(),
            lognormal: true,
            contamination: Some(Contamination {
                fraction: 0.05,
                magnitude: 5.0,
            }),
        }
    }

    #[test]
    fn deterministic_and_contamination_count_exact() {
        let a = simulate_field(&base()).unwrap();
        let b = simulate_field(&base()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truth.iter().filter(|t| t.contaminated).count(), 5);
        for (r, t) in a.dataset.records.iter().zip(&a.truth) {
            let y = (t.trend + t.grf + t.nugget).exp() * if t.contaminated { 5.0 } else { 1.0 };
            assert!((r.target.unwrap() - y).abs() <= 1e-12 * y);
        }
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let s = toml::to_string(&base()).unwrap();
        assert_eq!(SimSpec::from_toml_str(&s).unwrap(), base());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = base();
        s.contamination = Some(Contamination {
            fraction: 0.3,
            magnitude: 2.0,
        });
        assert!(s.validate().is_err());
        let mut s = base();
        s.trend.push(Effect::Linear {
            covariate: "nope".into(),
            slope: 1.0,
        });
        assert!(s.validate().is_err());
        let mut s = base();
        s.layout = Layout::Grid {
            spacing_km: 1.0,
            nx: 100,
            ny: 51,
        };
        assert!(s.validate().is_err());
    }
}
