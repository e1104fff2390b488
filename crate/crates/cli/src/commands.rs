use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use brtkrige::brt::{
    fit_spec, partial_dependence, predict_brt, read_model, variable_importance, write_model,
    FeatureMatrix,
};
use brtkrige::ingest::{
    load_dataset, load_horizons, log_transform, stocks_by_site, write_dataset, Dataset, LoadMode,
    RunConfig,
};
use brtkrige::kriging::{
    fit_residual_model, predict_lognormal, write_predictions, write_winsorize_report,
    KrigingPrediction, PredictionRow, ResidualModel,
};
use brtkrige::simulate::{simulate_field, write_ground_truth, SimSpec};
use brtkrige::validation::{
    compare_models, run_cv, write_long, write_plot_data, write_significance, write_summary,
    CvOptions, Metric,
};
use brtkrige::{Error, Result};

use crate::manifest::{sha256_hex, Manifest};
use crate::{Common, ConfigArgs};

const DEFAULT_OUT: &str = "brtkrige-out";

fn out_dir(flag: Option<&Path>, configured: Option<&Path>) -> Result<PathBuf> {
    let dir = flag
        .or(configured)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

struct Loaded {
    cfg: RunConfig,
    dataset: Dataset,
    out: PathBuf,
    manifest: Manifest,
}

fn load(args: &ConfigArgs, command: &str) -> Result<Loaded> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    cfg.validate()?;
    let out = out_dir(args.common.out.as_deref(), cfg.output_dir.as_deref())?;
    if !cfg.data.sites.exists() {
        return Err(Error::Config(format!(
            "site file {} does not exist",
            cfg.data.sites.display()
        )));
    }
    let dataset = load_dataset(&cfg.data.sites, &cfg.covariates, LoadMode::Fit)?;
    let mut manifest = Manifest::new(command);
    manifest.seed = Some(cfg.seed);
    manifest.config_sha256 = Some(sha256_hex(cfg.to_toml_string().as_bytes()));
    manifest.input(&args.config)?;
    manifest.input(&cfg.data.sites)?;
    Ok(Loaded {
        cfg,
        dataset,
        out,
        manifest,
    })
}

fn finish(manifest: Manifest, out: &Path, mut written: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
    let m = manifest.write(out, &written)?;
    written.push(m);
    Ok(written)
}

pub fn stock(horizons: &Path, depth: f64, common: &Common) -> Result<Vec<PathBuf>> {
    let out = out_dir(common.out.as_deref(), None)?;
    let recs = load_horizons(horizons)?;
    let stocks = stocks_by_site(&recs, depth)?;
    let path = out.join("stocks.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["site_id", "target"])?;
    for (id, s) in &stocks {
        w.write_record([id.clone(), s.to_string()])?;
    }
    w.flush()?;
    drop(w);
    let mut manifest = Manifest::new("stock");
    manifest.input(horizons)?;
    finish(manifest, &out, vec![path])
}

pub fn fit(args: &ConfigArgs, model_name: &str) -> Result<Vec<PathBuf>> {
    let Loaded {
        cfg,
        dataset,
        out,
        manifest,
    } = load(args, "fit")?;
    let spec = cfg.model(model_name)?;
    let model = fit_spec(&dataset.schema, &dataset.records, spec, cfg.seed)?;

    let model_path = out.join(format!("{model_name}.brtk"));
    write_model(create(&model_path)?, &model)?;

    let imp_path = out.join(format!("{model_name}_importance.csv"));
    let mut w = csv::Writer::from_writer(create(&imp_path)?);
    w.write_record(["covariate", "importance"])?;
    for (name, v) in variable_importance(&model) {
        w.write_record([name, v.to_string()])?;
    }
    w.flush()?;
    drop(w);

    let x = FeatureMatrix::from_records(&dataset.schema, &dataset.records, &spec.predictors)?;
    let pd_path = out.join(format!("{model_name}_partial_dependence.csv"));
    let mut w = csv::Writer::from_writer(create(&pd_path)?);
    w.write_record(["covariate", "label", "x", "value"])?;
    for p in &spec.predictors {
        for pt in partial_dependence(&model, &x, p, None)? {
            w.write_record([p.clone(), pt.label, pt.x.to_string(), pt.value.to_string()])?;
        }
    }
    w.flush()?;
    drop(w);

    finish(manifest, &out, vec![model_path, imp_path, pd_path])
}

pub fn cv(
    args: &ConfigArgs,
    repetitions: Option<usize>,
    workers: Option<usize>,
    rotation: bool,
) -> Result<Vec<PathBuf>> {
    let Loaded {
        mut cfg,
        dataset,
        out,
        mut manifest,
    } = load(args, "cv")?;
    if let Some(r) = repetitions {
        cfg.cv.repetitions = r;
    }
    if workers.is_some() {
        cfg.cv.workers = workers;
    }
    cfg.cv.rotation |= rotation;
    cfg.validate()?;
    // Worker count never changes results, so it stays out of the digest.
    let mut hashed = cfg.clone();
    hashed.cv.workers = None;
    manifest.config_sha256 = Some(sha256_hex(hashed.to_toml_string().as_bytes()));

    let report = run_cv(&dataset, &cfg.models, &CvOptions::from_config(&cfg))?;
    let paths: Vec<PathBuf> = [
        "cv_summary.csv",
        "cv_long.csv",
        "cv_significance.csv",
        "cv_plot_data.csv",
    ]
    .iter()
    .map(|n| out.join(n))
    .collect();
    write_summary(create(&paths[0])?, &report)?;
    write_long(create(&paths[1])?, &report)?;
    let sig: Vec<_> = Metric::ALL
        .iter()
        .map(|&m| compare_models(&report, m))
        .collect();
    write_significance(create(&paths[2])?, &sig)?;
    write_plot_data(create(&paths[3])?, &report, &dataset)?;
    finish(manifest, &out, paths)
}

fn residual_model(cfg: &RunConfig, dataset: &Dataset, h: &[f64]) -> Result<ResidualModel> {
    let z = log_transform(&dataset.records)?;
    let u: Vec<f64> = z.iter().zip(h).map(|(z, h)| z - h).collect();
    fit_residual_model(
        &dataset.coords(),
        &u,
        cfg.epsilon,
        &cfg.variogram,
        &cfg.winsorize,
    )
}

pub fn predict(
    args: &ConfigArgs,
    model_name: &str,
    sites: &Path,
    model_file: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let Loaded {
        cfg,
        dataset,
        out,
        mut manifest,
    } = load(args, "predict")?;
    let spec = cfg.model(model_name)?;
    let model_path = model_file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join(format!("{model_name}.brtk")));
    if !model_path.exists() {
        return Err(Error::Config(format!(
            "model file {} not found; run `brtkrige fit` first",
            model_path.display()
        )));
    }
    let model = read_model(File::open(&model_path)?)?;
    if model.predictor_names() != spec.predictors {
        return Err(Error::Config(format!(
            "model file predictors {:?} do not match model `{model_name}`",
            model.predictor_names()
        )));
    }
    manifest.input(&model_path)?;
    manifest.input(sites)?;
    let new_sites = load_dataset(sites, &cfg.covariates, LoadMode::Predict)?;
    let h_new = predict_brt(&model, &cfg.covariates, &new_sites.records)?;

    let kriged: Option<ResidualModel> = if spec.spatial {
        let h_learn = predict_brt(&model, &cfg.covariates, &dataset.records)?;
        Some(residual_model(&cfg, &dataset, &h_learn)?)
    } else {
        None
    };
    let rows = new_sites
        .records
        .iter()
        .zip(&h_new)
        .map(|(r, &h)| {
            let kp = match &kriged {
                Some(rm) => rm.kriger.predict([r.x_km, r.y_km]),
                None => KrigingPrediction {
                    u_hat: 0.0,
                    sigma2: 0.0,
                    psi: 0.0,
                },
            };
            Ok(PredictionRow {
                site_id: r.site_id.clone(),
                x_km: r.x_km,
                y_km: r.y_km,
                brt_z: h,
                u_hat: kp.u_hat,
                sigma2: kp.sigma2,
                psi: kp.psi,
                y_hat: predict_lognormal(h, &kp)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join(format!("{model_name}_predictions.csv"));
    write_predictions(create(&path)?, &rows)?;
    finish(manifest, &out, vec![path])
}

pub fn simulate(spec_path: &Path, seed: Option<u64>, common: &Common) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", spec_path.display())))?;
    let mut spec = SimSpec::from_toml_str(&text)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let out = out_dir(common.out.as_deref(), None)?;
    let sim = simulate_field(&spec)?;
    let sites = out.join("sites.csv");
    let truth = out.join("ground_truth.csv");
    write_dataset(create(&sites)?, &sim.dataset)?;
    write_ground_truth(create(&truth)?, &sim.truth)?;
    let mut manifest = Manifest::new("simulate");
    manifest.seed = Some(spec.seed);
    manifest.config_sha256 = Some(sha256_hex(
        toml::to_string(&spec)
            .map_err(|e| Error::Config(e.to_string()))?
            .as_bytes(),
    ));
    manifest.input(spec_path)?;
    finish(manifest, &out, vec![sites, truth])
}

pub fn report(args: &ConfigArgs, only: Option<&str>) -> Result<Vec<PathBuf>> {
    let Loaded {
        cfg,
        dataset,
        out,
        manifest,
    } = load(args, "report")?;
    let specs: Vec<_> = match only {
        Some(name) => vec![cfg.model(name)?.clone()],
        None => cfg.models.clone(),
    };
    let mut written = Vec::new();
    let table_path = out.join("report_table.csv");
    let mut table = csv::Writer::from_writer(create(&table_path)?);
    table.write_record([
        "model",
        "n",
        "n_trees",
        "c0",
        "c1",
        "phi_km",
        "kappa",
        "spatial_dependence",
        "effective_range_km",
        "theta_bar",
        "theta_med",
        "n_flagged",
        "pct_flagged",
        "c",
        "theta_bar_w",
        "theta_med_w",
        "status",
    ])?;
    for spec in &specs {
        let model = fit_spec(&dataset.schema, &dataset.records, spec, cfg.seed)?;
        let h = predict_brt(&model, &dataset.schema, &dataset.records)?;
        let n = dataset.len();
        let row = match residual_model(&cfg, &dataset, &h) {
            Ok(rm) => {
                let m = rm.winsorized.model;
                let w = &rm.winsorized;
                let emp_path = out.join(format!("{}_variogram.csv", spec.name));
                let mut vw = csv::Writer::from_writer(create(&emp_path)?);
                vw.write_record([
                    "lower_km",
                    "upper_km",
                    "mean_distance_km",
                    "pair_count",
                    "gamma",
                    "fitted_gamma",
                ])?;
                for b in &rm.empirical.bins {
                    vw.write_record([
                        b.lower_km.to_string(),
                        b.upper_km.to_string(),
                        b.mean_distance_km.to_string(),
                        b.pair_count.to_string(),
                        b.gamma.to_string(),
                        rm.initial.model.gamma(b.mean_distance_km)?.to_string(),
                    ])?;
                }
                vw.flush()?;
                drop(vw);
                let curve_path = out.join(format!("{}_variogram_curve.csv", spec.name));
                let mut cw = csv::Writer::from_writer(create(&curve_path)?);
                cw.write_record(["h_km", "gamma"])?;
                let hmax = rm.empirical.max_lag();
                for k in 0..=100 {
                    let d = hmax * k as f64 / 100.0;
                    cw.write_record([d.to_string(), rm.initial.model.gamma(d)?.to_string()])?;
                }
                cw.flush()?;
                drop(cw);
                let wz_path = out.join(format!("{}_winsorize.csv", spec.name));
                let ids: Vec<String> = dataset.records.iter().map(|r| r.site_id.clone()).collect();
                write_winsorize_report(create(&wz_path)?, &ids, w)?;
                written.extend([emp_path, curve_path, wz_path]);
                let sd = m
                    .spatial_dependence()
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                vec![
                    spec.name.clone(),
                    n.to_string(),
                    model.best_iteration().to_string(),
                    m.c0.to_string(),
                    m.c1.to_string(),
                    m.phi.to_string(),
                    m.kappa.to_string(),
                    sd,
                    m.practical_range(0.98).to_string(),
                    w.before.theta_bar.to_string(),
                    w.before.theta_med.to_string(),
                    w.n_flagged().to_string(),
                    (100.0 * w.n_flagged() as f64 / n as f64).to_string(),
                    w.c.map(|c| c.to_string()).unwrap_or_default(),
                    w.after.theta_bar.to_string(),
                    w.after.theta_med.to_string(),
                    "valid".to_string(),
                ]
            }
            Err(e)
                if e.category() != brtkrige::ErrorCategory::Config
                    && e.category() != brtkrige::ErrorCategory::Data =>
            {
                let mut r = vec![
                    spec.name.clone(),
                    n.to_string(),
                    model.best_iteration().to_string(),
                ];
                r.extend(std::iter::repeat_n(String::new(), 13));
                r.push(format!("failed: {e}"));
                r
            }
            Err(e) => return Err(e),
        };
        table.write_record(&row)?;
    }
    table.flush()?;
    drop(table);
    written.insert(0, table_path);
    finish(manifest, &out, written)
}
