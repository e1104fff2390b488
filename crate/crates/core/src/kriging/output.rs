use std::io::Write;

use serde::Serialize;

use super::winsorize::WinsorizeResult;
use crate::error::{Error, Result};

/// One line of the per-site prediction table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub site_id: String,
    pub x_km: f64,
    pub y_km: f64,
    pub brt_z: f64,
    pub u_hat: f64,
    pub sigma2: f64,
    pub psi: f64,
    pub y_hat: f64,
}

pub fn write_predictions<W: Write>(w: W, rows: &[PredictionRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_winsorize_report<W: Write>(
    w: W,
    site_ids: &[String],
    result: &WinsorizeResult,
) -> Result<()> {
    if site_ids.len() != result.sites.len() {
        return Err(Error::Validation(format!(
            "{} site ids for {} Winsorized sites",
            site_ids.len(),
            result.sites.len()
        )));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["site_id", "u", "U_minus", "U_plus", "u_star", "flag"])?;
    for (id, s) in site_ids.iter().zip(&result.sites) {
        out.write_record([
            id.clone(),
            s.u.to_string(),
            s.u_minus.to_string(),
            s.u_plus.to_string(),
            s.u_star.to_string(),
            u8::from(s.flag).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
