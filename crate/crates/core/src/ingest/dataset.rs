use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::{
    CovValue, CovariateKind, CovariateSchema, Dataset, HorizonRecord, SiteRecord, RESERVED_COLUMNS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Every row must carry a positive target; unknown categorical levels are errors.
    Fit,
    /// Targets may be blank; unknown categorical levels become missing values.
    Predict,
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &CovariateSchema,
    mode: LoadMode,
) -> Result<Dataset> {
    let f = std::fs::File::open(path.as_ref())?;
    read_dataset(f, schema, mode)
}

pub fn read_dataset<R: Read>(
    reader: R,
    schema: &CovariateSchema,
    mode: LoadMode,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();

    let col = |name: &str| header.iter().position(|h| h == name);
    let mut fixed = [0usize; 4];
    for (slot, name) in fixed.iter_mut().zip(RESERVED_COLUMNS) {
        *slot =
            col(name).ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))?;
    }
    // Column index of each schema covariate.
    let mut cov_cols = Vec::with_capacity(schema.len());
    for c in schema.covariates() {
        cov_cols.push(
            col(&c.name)
                .ok_or_else(|| Error::Schema(format!("missing covariate column `{}`", c.name)))?,
        );
    }
    for (i, h) in header.iter().enumerate() {
        if !RESERVED_COLUMNS.contains(&h) && schema.index_of(h).is_none() {
            return Err(Error::Schema(format!("unknown column `{h}`")));
        }
        if header.iter().take(i).any(|o| o == h) {
            return Err(Error::Schema(format!("duplicate column `{h}`")));
        }
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let rownum = i + 1;
        let row = row.map_err(|e| Error::Parse {
            row: rownum,
            msg: e.to_string(),
        })?;
        let perr = |msg: String| Error::Parse { row: rownum, msg };

        let site_id = row[fixed[0]].to_string();
        if site_id.is_empty() {
            return Err(perr("empty site_id".into()));
        }
        if !seen.insert(site_id.clone()) {
            return Err(Error::DuplicateId(site_id));
        }
        let coord = |k: usize, name: &str| -> Result<f64> {
            let v: f64 = row[fixed[k]]
                .parse()
                .map_err(|_| perr(format!("bad {name} `{}`", &row[fixed[k]])))?;
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "row {rownum}: {name} is not finite"
                )));
            }
            Ok(v)
        };
        let x_km = coord(1, "x_km")?;
        let y_km = coord(2, "y_km")?;

        let tcell = &row[fixed[3]];
        let target = if tcell.is_empty() {
            if mode == LoadMode::Fit {
                return Err(Error::Validation(format!(
                    "row {rownum} (site `{site_id}`): missing target"
                )));
            }
            None
        } else {
            let t: f64 = tcell
                .parse()
                .map_err(|_| perr(format!("bad target `{tcell}`")))?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Validation(format!(
                    "row {rownum} (site `{site_id}`): target must be positive, got {t}"
                )));
            }
            Some(t)
        };

        let mut covariates = Vec::with_capacity(schema.len());
        for (def, &c) in schema.covariates().iter().zip(&cov_cols) {
            let cell = &row[c];
            let v = if cell.is_empty() {
                if !def.missing_allowed {
                    return Err(Error::Validation(format!(
                        "row {rownum}: covariate `{}` may not be missing",
                        def.name
                    )));
                }
                CovValue::Missing
            } else {
                match def.kind {
                    CovariateKind::Numeric => {
                        let v: f64 = cell
                            .parse()
                            .map_err(|_| perr(format!("bad value `{cell}` for `{}`", def.name)))?;
                        if v.is_nan() {
                            CovValue::Missing
                        } else {
                            CovValue::Numeric(v)
                        }
                    }
                    CovariateKind::Categorical => match def.level_index(cell) {
                        Some(l) => CovValue::Level(l),
                        None if mode == LoadMode::Predict => CovValue::Missing,
                        None => {
                            return Err(Error::Schema(format!(
                                "row {rownum}: unknown level `{cell}` for `{}`",
                                def.name
                            )))
                        }
                    },
                }
            };
            covariates.push(v);
        }
        records.push(SiteRecord {
            site_id,
            x_km,
            y_km,
            target,
            covariates,
        });
    }
    Ok(Dataset {
        schema: schema.clone(),
        records,
    })
}

/// Writes the site CSV layout that [`read_dataset`] accepts.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = RESERVED_COLUMNS.to_vec();
    header.extend(data.schema.covariates().iter().map(|c| c.name.as_str()));
    w.write_record(&header)?;
    for r in &data.records {
        let mut row = vec![
            r.site_id.clone(),
            r.x_km.to_string(),
            r.y_km.to_string(),
            r.target.map(|t| t.to_string()).unwrap_or_default(),
        ];
        for (def, v) in data.schema.covariates().iter().zip(&r.covariates) {
            row.push(match v {
                CovValue::Numeric(x) => x.to_string(),
                CovValue::Level(l) => def.levels[*l as usize].clone(),
                CovValue::Missing => String::new(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_horizons(path: impl AsRef<Path>) -> Result<Vec<HorizonRecord>> {
    read_horizons(std::fs::File::open(path.as_ref())?)
}

pub fn read_horizons<R: Read>(reader: R) -> Result<Vec<HorizonRecord>> {
    const COLS: [&str; 6] = [
        "site_id",
        "top_cm",
        "bottom_cm",
        "bulk_density",
        "soc_pct",
        "rock_frag",
    ];
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(COLS) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("horizon file lacks column `{name}`")))?;
    }
    if let Some(h) = header.iter().find(|h| !COLS.contains(h)) {
        return Err(Error::Schema(format!(
            "unknown column `{h}` in horizon file"
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let rownum = i + 1;
        let row = row.map_err(|e| Error::Parse {
            row: rownum,
            msg: e.to_string(),
        })?;
        let num = |k: usize| -> Result<f64> {
            row[idx[k]].parse().map_err(|_| Error::Parse {
                row: rownum,
                msg: format!("bad {} `{}`", COLS[k], &row[idx[k]]),
            })
        };
        out.push(HorizonRecord {
            site_id: row[idx[0]].to_string(),
            top_cm: num(1)?,
            bottom_cm: num(2)?,
            bulk_density: num(3)?,
            soc_pct: num(4)?,
            rock_frag: num(5)?,
        });
    }
    Ok(out)
}

/// `z = ln(target)` for every record.
pub fn log_transform(records: &[SiteRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| match r.target {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t.ln()),
            Some(t) => Err(Error::Domain(format!(
                "site `{}`: cannot log-transform target {t}",
                r.site_id
            ))),
            None => Err(Error::Domain(format!("site `{}` has no target", r.site_id))),
        })
        .collect()
}
