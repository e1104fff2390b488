mod common;

use brtkrige::brt::{
    best_split, categorical, fit_brt, numeric, partial_dependence, read_model, variable_importance,
    write_model, FeatureMatrix, NodeRows, SplitRule,
};
use brtkrige::ingest::BrtParams;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_min, chosen_sse, sse};

fn quick(tree_size: usize, lr: f64, max_trees: usize) -> BrtParams {
    BrtParams {
        tree_size,
        learning_rate: lr,
        max_trees,
        ..BrtParams::default()
    }
}

fn r2(obs: &[f64], pred: &[f64]) -> f64 {
    let m = obs.iter().sum::<f64>() / obs.len() as f64;
    let sst: f64 = obs.iter().map(|o| (o - m).powi(2)).sum();
    let sse: f64 = obs.iter().zip(pred).map(|(o, p)| (o - p).powi(2)).sum();
    1.0 - sse / sst
}

#[test]
fn default_hyperparameters() {
    let p = BrtParams::default();
    assert_eq!(
        (p.tree_size, p.learning_rate, p.min_obs_leaf, p.bag_fraction),
        (12, 0.01, 3, 0.7)
    );
    assert_eq!((p.max_trees, p.internal_cv_folds), (10_000, 5));
}

#[test]
fn constant_target_gives_zero_trees() {
    let x = FeatureMatrix::from_columns(vec![numeric("a")], vec![(0..20).map(f64::from).collect()]);
    let m = fit_brt(&x, &[2.5; 20], &BrtParams::default(), 1).unwrap();
    assert_eq!(m.best_iteration(), 0);
    assert!(m.predict(&x).iter().all(|&p| p == 2.5));
    assert!(m.importance.iter().all(|&v| v == 0.0));
}

#[test]
fn empty_predictors_is_config_error() {
    let x = FeatureMatrix::from_columns(vec![], vec![]);
    let x = FeatureMatrix { n_rows: 10, ..x };
    assert!(matches!(
        fit_brt(&x, &[1.0; 10], &BrtParams::default(), 1),
        Err(brtkrige::Error::Config(_))
    ));
}

#[test]
fn single_tree_hand_trace() {
    // z = (1, 3, 2, 10, 14) at x = 1..5; f0 = 6, residuals (-5, -3, -4, 4, 8).
    // Candidate cuts: 1.5 -> SSE 98.75, 2.5 -> 76.67, 3.5 -> 2 + 8 = 10, 4.5 -> 50.
    // The 3.5 cut wins with leaf means -4 and 6, so predictions are 2 and 12.
    let x = FeatureMatrix::from_columns(vec![numeric("a")], vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]]);
    let z = [1.0, 3.0, 2.0, 10.0, 14.0];
    let params = BrtParams {
        tree_size: 1,
        learning_rate: 1.0,
        min_obs_leaf: 1,
        bag_fraction: 1.0,
        max_trees: 1,
        internal_cv_folds: 0,
        patience: None,
    };
    let m = fit_brt(&x, &z, &params, 3).unwrap();
    assert_eq!(m.best_iteration(), 1);
    match &m.trees[0].nodes[0] {
        brtkrige::brt::Node::Split {
            rule: SplitRule::Numeric { threshold },
            ..
        } => assert_eq!(*threshold, 3.5),
        other => panic!("{other:?}"),
    }
    assert_eq!(m.predict(&x), vec![2.0, 2.0, 2.0, 12.0, 12.0]);

    // A deep tree with singleton leaves reproduces every learning value.
    let deep = BrtParams {
        tree_size: 10,
        ..params
    };
    let m = fit_brt(&x, &z, &deep, 3).unwrap();
    for (p, zz) in m.predict(&x).iter().zip(&z) {
        assert!((p - zz).abs() < 1e-12);
    }
}

fn step_data(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let z = x1
        .iter()
        .map(|&v| {
            if v < 3.0 {
                1.0
            } else if v < 7.0 {
                2.5
            } else {
                0.5
            }
        })
        .collect();
    (
        FeatureMatrix::from_columns(vec![numeric("x1")], vec![x1]),
        z,
    )
}

#[test]
fn step_function_recovered() {
    let (x, z) = step_data(1000, 5);
    let (xt, zt) = step_data(500, 6);
    let m = fit_brt(&x, &z, &quick(4, 0.1, 300), 17).unwrap();
    let r = r2(&zt, &m.predict(&xt));
    assert!(r >= 0.95, "held-out R² {r}");
    assert!(m.best_iteration() > 0);
}

#[test]
fn training_deviance_nonincreasing_and_shrinkage_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 300;
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let x2: Vec<f64> = (0..n)
        .map(|i| {
            if i % 7 == 0 {
                f64::NAN
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect();
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
    let z: Vec<f64> = (0..n)
        .map(|i| (3.0 * x1[i]).sin() + c[i] * 0.3 + rng.random_range(-0.5..0.5))
        .collect();
    let x = FeatureMatrix::from_columns(
        vec![numeric("x1"), numeric("x2"), categorical("c", 4)],
        vec![x1, x2, c],
    );
    let params = BrtParams {
        max_trees: 200,
        learning_rate: 0.05,
        patience: None,
        ..BrtParams::default()
    };
    let m = fit_brt(&x, &z, &params, 4).unwrap();
    assert_eq!(m.train_deviance.len(), m.best_iteration() + 1);
    for w in m.train_deviance.windows(2) {
        assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
    }
    // Each tree moves any prediction by at most lr * max |leaf|.
    let mut partial = m.clone();
    partial.trees.clear();
    let mut prev = partial.predict(&x);
    for t in &m.trees {
        partial.trees.push(t.clone());
        let next = partial.predict(&x);
        let bound = m.learning_rate * t.max_abs_leaf();
        for (a, b) in prev.iter().zip(&next) {
            assert!((a - b).abs() <= bound + 1e-12);
        }
        prev = next;
    }
    for t in &m.trees {
        assert!(t.n_splits() <= params.tree_size);
        assert!(t.is_well_formed());
    }
}

#[test]
fn reproducible_bit_for_bit_and_file_round_trip() {
    let (x, z) = step_data(400, 8);
    let p = quick(6, 0.1, 80);
    let a = fit_brt(&x, &z, &p, 99).unwrap();
    let b = fit_brt(&x, &z, &p, 99).unwrap();
    assert_eq!(a, b);
    let mut buf = Vec::new();
    write_model(&mut buf, &a).unwrap();
    let back = read_model(buf.as_slice()).unwrap();
    assert_eq!(back, a);
    let mut buf2 = Vec::new();
    write_model(&mut buf2, &back).unwrap();
    assert_eq!(buf, buf2);
    assert!(read_model(&buf[..buf.len() - 3]).is_err());
    let c = fit_brt(&x, &z, &p, 100).unwrap();
    assert_ne!(a.trees, c.trees);
}

#[test]
fn missing_and_unknown_levels_route_to_missing_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 200;
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let c: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
    let z: Vec<f64> = (0..n).map(|i| a[i] + c[i]).collect();
    let feats = vec![numeric("a"), categorical("c", 4)];
    let x = FeatureMatrix::from_columns(feats.clone(), vec![a, c]);
    let m = fit_brt(&x, &z, &quick(4, 0.1, 50), 1).unwrap();
    // Level 3 never occurs while fitting; NaN is missing.
    let probe = FeatureMatrix::from_columns(feats, vec![vec![f64::NAN, 0.5], vec![f64::NAN, 3.0]]);
    let p = m.predict(&probe);
    assert!(p.iter().all(|v| v.is_finite()));

    let zero = brtkrige::brt::BoostedModel { trees: vec![], ..m };
    assert!(zero.predict(&probe).iter().all(|&v| v == zero.f0));
}

#[test]
fn importance_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 2000;
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let flat = vec![1.0; n];
    let z: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
    let x = FeatureMatrix::from_columns(
        vec![numeric("x1"), numeric("x2"), numeric("flat")],
        vec![x1.clone(), x2, flat],
    );
    let m = fit_brt(&x, &z, &quick(3, 0.1, 60), 3).unwrap();
    let imp = variable_importance(&m);
    let total: f64 = imp.iter().map(|(_, v)| v).sum();
    assert!((total - 100.0).abs() < 1e-9);
    assert!(imp[0].1 > imp[1].1, "{imp:?}");
    assert_eq!(imp[2].1, 0.0);
    assert!(imp.iter().all(|(_, v)| *v >= 0.0));

    let single = FeatureMatrix::from_columns(vec![numeric("x1")], vec![x1]);
    let m = fit_brt(&single, &z, &quick(3, 0.1, 20), 3).unwrap();
    assert!((variable_importance(&m)[0].1 - 100.0).abs() < 1e-9);
}

#[test]
fn partial_dependence_recovers_additive_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 2000;
    let g = |v: f64| (2.0 * v).sin();
    let h = |v: f64| 0.5 * v * v;
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let z: Vec<f64> = (0..n).map(|i| g(x1[i]) + h(x2[i])).collect();
    let x = FeatureMatrix::from_columns(vec![numeric("x1"), numeric("x2")], vec![x1, x2]);
    let m = fit_brt(&x, &z, &quick(2, 0.1, 400), 5).unwrap();
    let grid: Vec<f64> = (0..25).map(|i| 0.1 + 2.8 * i as f64 / 24.0).collect();
    let pd = partial_dependence(&m, &x, "x1", Some(&grid)).unwrap();
    let gv: Vec<f64> = grid.iter().map(|&v| g(v)).collect();
    let shift = pd.iter().zip(&gv).map(|(p, g)| p.value - g).sum::<f64>() / gv.len() as f64;
    let rms = (pd
        .iter()
        .zip(&gv)
        .map(|(p, g)| (p.value - g - shift).powi(2))
        .sum::<f64>()
        / gv.len() as f64)
        .sqrt();
    let gm = gv.iter().sum::<f64>() / gv.len() as f64;
    let sd = (gv.iter().map(|v| (v - gm).powi(2)).sum::<f64>() / (gv.len() - 1) as f64).sqrt();
    assert!(rms <= 0.1 * sd, "rms {rms} vs sd {sd}");

    assert!(partial_dependence(&m, &x, "nope", None).is_err());
}

#[test]
fn partial_dependence_shapes() {
    let n = 60;
    let c: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
    let z: Vec<f64> = c.iter().map(|v| v * 2.0).collect();
    let x = FeatureMatrix::from_columns(vec![categorical("c", 3)], vec![c]);
    let m = fit_brt(&x, &z, &quick(2, 0.5, 20), 5).unwrap();
    let pd = partial_dependence(&m, &x, "c", None).unwrap();
    assert_eq!(pd.len(), 3);
    assert!(pd[0].value < pd[1].value && pd[1].value < pd[2].value);

    let konst = fit_brt(&x, &[1.5; 60], &BrtParams::default(), 1).unwrap();
    let pd = partial_dependence(&konst, &x, "c", None).unwrap();
    assert!(pd.iter().all(|p| p.value == 1.5));
}

fn arb_node() -> impl Strategy<Value = (FeatureMatrix, Vec<f64>, usize)> {
    (4usize..=50, 1usize..=4, any::<u64>()).prop_map(|(n, min_obs, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cell = |levels: Option<u32>| -> f64 {
            if rng.random_range(0.0..1.0) < 0.1 {
                f64::NAN
            } else {
                match levels {
                    Some(l) => rng.random_range(0..l) as f64,
                    None => (rng.random_range(0.0..20.0) as f64).round() / 2.0,
                }
            }
        };
        let a: Vec<f64> = (0..n).map(|_| cell(None)).collect();
        let b: Vec<f64> = (0..n).map(|_| cell(None)).collect();
        let c: Vec<f64> = (0..n).map(|_| cell(Some(6))).collect();
        let resid: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = FeatureMatrix::from_columns(
            vec![numeric("a"), numeric("b"), categorical("c", 6)],
            vec![a, b, c],
        );
        (x, resid, min_obs)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chosen_split_is_brute_force_optimal((x, resid, min_obs) in arb_node()) {
        let node = NodeRows::from_rows(&x, (0..x.n_rows as u32).collect());
        let got = best_split(&x, &resid, &node, min_obs);
        let oracle = brute_force_min(&x, &resid, min_obs);
        let total = sse(&resid);
        match (got, oracle) {
            (Some(s), Some(best)) => {
                let mine = chosen_sse(&x, &resid, &s);
                prop_assert!((mine - best).abs() <= 1e-9 * (1.0 + total), "mine {} oracle {}", mine, best);
                prop_assert!((total - mine - s.improvement).abs() <= 1e-9 * (1.0 + total));
            }
            (None, Some(best)) => prop_assert!(total - best <= 1e-9 * (1.0 + total), "missed a split: {} -> {}", total, best),
            (Some(s), None) => prop_assert!(false, "split {:?} where none admissible", s),
            (None, None) => {}
        }
    }

    #[test]
    fn categorical_ordered_scan_matches_subset_search(
        n in 8usize..=50, levels in 2u32..=8, seed in any::<u64>(), min_obs in 1usize..=6
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let effects: Vec<f64> = (0..levels).map(|_| rng.random_range(-3.0..3.0)).collect();
        let resid: Vec<f64> = c.iter().map(|&l| effects[l as usize] + rng.random_range(-1.0..1.0)).collect();
        let x = FeatureMatrix::from_columns(vec![categorical("c", levels as usize)], vec![c]);
        let node = NodeRows::from_rows(&x, (0..n as u32).collect());
        let got = best_split(&x, &resid, &node, min_obs);
        let oracle = brute_force_min(&x, &resid, min_obs);
        let total = sse(&resid);
        match (got, oracle) {
            (Some(s), Some(best)) => {
                let mine = chosen_sse(&x, &resid, &s);
                prop_assert!((mine - best).abs() <= 1e-9 * (1.0 + total));
            }
            (None, Some(best)) => prop_assert!(total - best <= 1e-9 * (1.0 + total)),
            (Some(_), None) => prop_assert!(false),
            (None, None) => {}
        }
    }
}
