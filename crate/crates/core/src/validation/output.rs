use std::io::Write;

use super::compare::SignificanceMatrix;
use super::cv::CvReport;
use super::metrics::Metric;
use crate::error::Result;
use crate::ingest::Dataset;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per model and metric: mean and 95% interval over valid repetitions.
pub fn write_summary<W: Write>(w: W, report: &CvReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "model", "spatial", "metric", "mean", "ci_low", "ci_high", "n_valid", "n_failed",
    ])?;
    for s in &report.summaries {
        for m in &s.metrics {
            out.write_record([
                s.model.clone(),
                s.spatial.to_string(),
                m.metric.to_string(),
                m.mean.to_string(),
                m.ci_low.to_string(),
                m.ci_high.to_string(),
                s.n_valid.to_string(),
                s.n_failed.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per model, repetition and metric, with the spatial diagnostics of
/// the repetition's first fold.
pub fn write_long<W: Write>(w: W, report: &CvReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "model",
        "repetition",
        "metric",
        "value",
        "valid",
        "n_trees",
        "c0",
        "c1",
        "phi",
        "kappa",
        "winsorize_c",
        "n_flagged",
        "theta_bar",
        "theta_med",
    ])?;
    for r in &report.results {
        let d = &r.folds[0];
        let v = d.variogram;
        for m in Metric::ALL {
            out.write_record([
                r.model.clone(),
                r.repetition.to_string(),
                m.to_string(),
                opt(r.metrics.map(|s| s.get(m))),
                r.metrics.is_some().to_string(),
                d.n_trees.to_string(),
                opt(v.map(|v| v.c0)),
                opt(v.map(|v| v.c1)),
                opt(v.map(|v| v.phi)),
                opt(v.map(|v| v.kappa)),
                opt(d.winsorize_c),
                d.n_flagged.to_string(),
                opt(d.theta_after.map(|t| t.theta_bar)),
                opt(d.theta_after.map(|t| t.theta_med)),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_significance<W: Write>(w: W, matrices: &[SignificanceMatrix]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "metric",
        "model_a",
        "model_b",
        "p_value",
        "alpha_adjusted",
        "significant",
    ])?;
    for m in matrices {
        for p in &m.pairs {
            out.write_record([
                m.metric.to_string(),
                p.model_a.clone(),
                p.model_b.clone(),
                opt(p.p_value),
                m.alpha_adjusted.to_string(),
                p.significant
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "untestable".into()),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Per model and site: observed value, mean prediction and mean error over
/// the repetitions in which the site was held out.
pub fn write_plot_data<W: Write>(w: W, report: &CvReport, dataset: &Dataset) -> Result<()> {
    let n = dataset.len();
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "model",
        "site_id",
        "x_km",
        "y_km",
        "observed",
        "mean_predicted",
        "mean_error",
        "n_predictions",
    ])?;
    for model in &report.models {
        let mut sum = vec![0.0; n];
        let mut count = vec![0usize; n];
        for r in report.results.iter().filter(|r| &r.model == model) {
            for p in &r.predictions {
                sum[p.site] += p.predicted;
                count[p.site] += 1;
            }
        }
        for (i, rec) in dataset.records.iter().enumerate() {
            if count[i] == 0 {
                continue;
            }
            let obs = rec.target.unwrap_or(f64::NAN);
            let mp = sum[i] / count[i] as f64;
            out.write_record([
                model.clone(),
                rec.site_id.clone(),
                rec.x_km.to_string(),
                rec.y_km.to_string(),
                obs.to_string(),
                mp.to_string(),
                (mp - obs).to_string(),
                count[i].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
