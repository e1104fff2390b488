use brtkrige::ingest::{BrtParams, Dataset, ModelSpec};
use brtkrige::simulate::{simulate_field, CovariateGen, Effect, Layout, SimSpec};
use brtkrige::stats::iqr;
use brtkrige::validation::{
    compare_models, run_cv, run_repetition, split_indices, welch_test, write_long, write_plot_data,
    write_significance, write_summary, CvOptions, Metric,
};
use brtkrige::variogram::MaternModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn small_brt() -> BrtParams {
    BrtParams {
        tree_size: 3,
        learning_rate: 0.1,
        max_trees: 80,
        ..BrtParams::default()
    }
}

fn dataset(seed: u64, n: usize) -> Dataset {
    let spec = SimSpec {
        seed,
        layout: Layout::Random {
            n,
            width_km: 200.0,
            height_km: 200.0,
        },
        intercept: 1.5,
        covariates: vec![
            CovariateGen::Uniform {
                name: "a".into(),
                low: 0.0,
                high: 1.0,
            },
            CovariateGen::Categorical {
                name: "lu".into(),
                levels: vec!["x".into(), "y".into()],
            },
        ],
        trend: vec![
            Effect::Linear {
                covariate: "a".into(),
                slope: 0.6,
            },
            Effect::Levels {
                covariate: "lu".into(),
                values: vec![0.0, 0.3],
            },
        ],
        residual: MaternModel::new(0.03, 0.1, 40.0, 0.5).unwrap(),
        lognormal: true,
        contamination: None,
    };
    simulate_field(&spec).unwrap().dataset
}

fn specs() -> Vec<ModelSpec> {
    let preds = vec!["a".to_string(), "lu".to_string()];
    vec![
        ModelSpec {
            name: "plain".into(),
            predictors: preds.clone(),
            brt: small_brt(),
            spatial: false,
        },
        ModelSpec {
            name: "kriged".into(),
            predictors: preds,
            brt: small_brt(),
            spatial: true,
        },
    ]
}

fn opts(seed: u64, reps: usize) -> CvOptions {
    CvOptions {
        repetitions: reps,
        ..CvOptions::new(seed)
    }
}

fn report_bytes(r: &brtkrige::validation::CvReport, d: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_summary(&mut buf, r).unwrap();
    write_long(&mut buf, r).unwrap();
    let sig: Vec<_> = Metric::ALL.iter().map(|&m| compare_models(r, m)).collect();
    write_significance(&mut buf, &sig).unwrap();
    write_plot_data(&mut buf, r, d).unwrap();
    buf
}

#[test]
fn deterministic_across_worker_counts() {
    let d = dataset(1, 150);
    let one = run_cv(
        &d,
        &specs(),
        &CvOptions {
            workers: Some(1),
            ..opts(9, 6)
        },
    )
    .unwrap();
    let four = run_cv(
        &d,
        &specs(),
        &CvOptions {
            workers: Some(4),
            ..opts(9, 6)
        },
    )
    .unwrap();
    assert_eq!(one, four);
    assert_eq!(report_bytes(&one, &d), report_bytes(&four, &d));
    let other = run_cv(
        &d,
        &specs(),
        &CvOptions {
            workers: Some(2),
            ..opts(10, 6)
        },
    )
    .unwrap();
    assert_ne!(one, other);
}

#[test]
fn metric_consistency_and_shapes() {
    let d = dataset(2, 150);
    let r = run_cv(&d, &specs(), &opts(3, 5)).unwrap();
    assert_eq!(r.results.len(), 10);
    let iq = iqr(&d.targets().unwrap());
    assert_eq!(r.iq_y, iq);
    for rep in &r.results {
        if let Some(m) = rep.metrics {
            assert!((m.rpiq * m.rmspe - iq).abs() <= 1e-10 * iq);
            assert!(m.rmspe >= 0.0 && m.rmedspe >= 0.0 && (0.0..=1.0).contains(&m.r2));
            assert_eq!(rep.predictions.len(), 15);
        }
    }
    for s in &r.summaries {
        assert_eq!(s.n_valid + s.n_failed, 5);
    }
    let sig = compare_models(&r, Metric::Rmspe);
    assert_eq!(sig.pairs.len(), 1);
    assert_eq!(sig.get(0, 1), sig.get(1, 0));
    assert!((sig.alpha_adjusted - 0.05).abs() < 1e-15);
}

#[test]
fn validation_targets_never_reach_the_fit() {
    let d = dataset(4, 120);
    let o = opts(5, 3);
    let iq = iqr(&d.targets().unwrap());
    for rep in 0..3 {
        let (_, val) = split_indices(d.len(), o.validation_fraction, o.seed, rep);
        let mut masked = d.clone();
        for &i in &val {
            let t = masked.records[i].target.unwrap();
            masked.records[i].target = Some(t * 7.3);
        }
        let a = run_repetition(&d, &specs(), &o, iq, rep).unwrap();
        let b = run_repetition(&masked, &specs(), &o, iq, rep).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.folds, y.folds);
            let px: Vec<f64> = x.predictions.iter().map(|p| p.predicted).collect();
            let py: Vec<f64> = y.predictions.iter().map(|p| p.predicted).collect();
            assert_eq!(px, py);
        }
    }
}

#[test]
fn rotation_predicts_every_site_once() {
    let d = dataset(6, 100);
    let o = CvOptions {
        rotation: true,
        ..opts(2, 2)
    };
    let r = run_cv(&d, &specs()[..1], &o).unwrap();
    for rep in &r.results {
        assert_eq!(rep.folds.len(), 10);
        let sites: Vec<usize> = rep.predictions.iter().map(|p| p.site).collect();
        assert_eq!(sites, (0..100).collect::<Vec<_>>());
    }
}

#[test]
fn constant_target_is_degenerate_but_unbiased() {
    let mut d = dataset(7, 60);
    for r in &mut d.records {
        r.target = Some(3.2);
    }
    let r = run_cv(&d, &specs()[..1], &opts(1, 4)).unwrap();
    for rep in &r.results {
        let m = rep.metrics.unwrap();
        assert!(m.mpe.abs() < 1e-12);
        assert!(m.r2_degenerate);
    }
}

#[test]
fn welch_rejection_rate_is_calibrated() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 1000;
    let mut rejected = 0;
    for _ in 0..trials {
        let a: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        if welch_test(&a, &b).unwrap() < 0.05 {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / trials as f64;
    let se = (0.05f64 * 0.95 / trials as f64).sqrt();
    assert!((rate - 0.05).abs() <= 2.0 * se, "rejection rate {rate}");
}

#[test]
fn rejects_bad_requests() {
    let d = dataset(8, 60);
    assert!(run_cv(&d, &[], &opts(1, 2)).is_err());
    let mut dup = specs();
    dup[1].name = "plain".into();
    assert!(run_cv(&d, &dup, &opts(1, 2)).is_err());
}
