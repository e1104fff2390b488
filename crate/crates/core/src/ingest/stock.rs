use super::HorizonRecord;
use crate::error::{Error, Result};

const DEPTH_TOL: f64 = 1e-9;

/// SOC stock (kg/m²) of the `[0, depth_cm]` layer from one site's horizons.
///
/// Each horizon contributes `p/100 · BD·1000 · SOC/100 · (1 − rf)` where `p` is
/// the thickness in cm of the part of the horizon lying above `depth_cm`.
/// Horizons must tile the layer from the surface downward; horizons that start
/// at or below `depth_cm` are ignored.
pub fn compute_stock(horizons: &[HorizonRecord], depth_cm: f64) -> Result<f64> {
    if !(depth_cm > 0.0 && depth_cm.is_finite()) {
        return Err(Error::Validation(format!(
            "depth must be positive, got {depth_cm}"
        )));
    }
    let site = horizons
        .first()
        .map(|h| h.site_id.clone())
        .unwrap_or_default();
    for h in horizons {
        validate_horizon(h)?;
    }
    let mut sorted: Vec<&HorizonRecord> = horizons.iter().collect();
    sorted.sort_by(|a, b| a.top_cm.total_cmp(&b.top_cm));

    let mut reached = 0.0;
    let mut stock = 0.0;
    for h in sorted
        .iter()
        .take_while(|h| h.top_cm < depth_cm - DEPTH_TOL)
    {
        if h.top_cm > reached + DEPTH_TOL {
            return Err(Error::Coverage {
                site,
                msg: format!("gap between {reached} cm and {} cm", h.top_cm),
            });
        }
        if h.top_cm < reached - DEPTH_TOL {
            return Err(Error::Coverage {
                site,
                msg: format!(
                    "horizon starting at {} cm overlaps the one ending at {reached} cm",
                    h.top_cm
                ),
            });
        }
        let width = h.bottom_cm.min(depth_cm) - h.top_cm;
        stock +=
            width / 100.0 * (h.bulk_density * 1000.0) * (h.soc_pct / 100.0) * (1.0 - h.rock_frag);
        reached = h.bottom_cm;
    }
    if reached < depth_cm - DEPTH_TOL {
        return Err(Error::Coverage {
            site,
            msg: format!("horizons reach {reached} cm, short of {depth_cm} cm"),
        });
    }
    Ok(stock)
}

fn validate_horizon(h: &HorizonRecord) -> Result<()> {
    let bad = |what: &str| {
        Err(Error::Validation(format!(
            "site `{}` horizon {}-{} cm: {what}",
            h.site_id, h.top_cm, h.bottom_cm
        )))
    };
    let finite = [
        h.top_cm,
        h.bottom_cm,
        h.bulk_density,
        h.soc_pct,
        h.rock_frag,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return bad("non-finite value");
    }
    if h.top_cm < 0.0 || h.top_cm >= h.bottom_cm {
        return bad("depth bounds must satisfy 0 <= top < bottom");
    }
    if h.bulk_density <= 0.0 {
        return bad("bulk density must be positive");
    }
    if !(0.0..=100.0).contains(&h.soc_pct) {
        return bad("SOC percent outside [0, 100]");
    }
    if !(0.0..=1.0).contains(&h.rock_frag) {
        return bad("rock fragment fraction outside [0, 1]");
    }
    Ok(())
}

/// Groups horizons by site (first-appearance order) and computes each site's stock.
pub fn stocks_by_site(horizons: &[HorizonRecord], depth_cm: f64) -> Result<Vec<(String, f64)>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: std::collections::HashMap<&str, Vec<HorizonRecord>> = Default::default();
    for h in horizons {
        let e = groups.entry(h.site_id.as_str()).or_insert_with(|| {
            order.push(h.site_id.as_str());
            Vec::new()
        });
        e.push(h.clone());
    }
    order
        .into_iter()
        .map(|id| compute_stock(&groups[id], depth_cm).map(|s| (id.to_string(), s)))
        .collect()
}
