mod common;

use brtkrige::ingest::WinsorizeSettings;
use brtkrige::kriging::{krige_point, loo_theta, predict_lognormal, winsorize, Kriger, LooKriger};
use brtkrige::simulate::GrfSampler;
use brtkrige::variogram::MaternModel;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::kriging_oracle;

#[test]
fn three_donor_exponential_matches_oracle() {
    let m = MaternModel::new(0.1, 0.05, 50.0, 0.5).unwrap();
    let coords = [[0.0, 0.0], [30.0, 10.0], [12.0, 45.0]];
    let u = [0.2, -0.1, 0.4];
    let target = [15.0, 15.0];
    let (lambda, psi, sigma2) = kriging_oracle(&coords, &m, target);
    let k = Kriger::new(&coords, &u, &m).unwrap();
    let p = k.predict(target);
    for (a, b) in k.weights(target).iter().zip(&lambda) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!((p.psi - psi).abs() < 1e-10);
    assert!((p.sigma2 - sigma2).abs() < 1e-10);
    let u_hat: f64 = lambda.iter().zip(&u).map(|(l, v)| l * v).sum();
    assert!((p.u_hat - u_hat).abs() < 1e-10);
}

#[test]
fn fifty_random_configurations_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let n = rng.random_range(3..=10);
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
            .collect();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = MaternModel::new(
            rng.random_range(0.01..0.2),
            rng.random_range(0.01..0.2),
            rng.random_range(5.0..80.0),
            rng.random_range(0.2..2.5),
        )
        .unwrap();
        let target = [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)];
        let (lambda, psi, sigma2) = kriging_oracle(&coords, &m, target);
        let k = Kriger::new(&coords, &u, &m).unwrap();
        let w = k.weights(target);
        let p = k.predict(target);
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        for (a, b) in w.iter().zip(&lambda) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((p.psi - psi).abs() < 1e-10);
        assert!((p.sigma2 - sigma2).abs() < 1e-10);
    }
}

#[test]
fn symmetric_donors_get_equal_weights() {
    for kappa in [0.3, 0.5, 1.5, 4.0] {
        let m = MaternModel::new(0.02, 0.1, 20.0, kappa).unwrap();
        let k = Kriger::new(&[[-7.0, 3.0], [7.0, 3.0]], &[1.0, 3.0], &m).unwrap();
        let w = k.weights([0.0, -11.0]);
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
        assert!((k.predict([0.0, -11.0]).u_hat - 2.0).abs() < 1e-12);
    }
}

#[test]
fn zero_nugget_exactness_and_continuity() {
    let m = MaternModel::new(0.0, 0.1, 30.0, 0.5).unwrap();
    let coords = [[0.0, 0.0], [20.0, 5.0], [8.0, 25.0], [40.0, 40.0]];
    let u = [0.3, -0.2, 0.1, 0.6];
    let k = Kriger::new(&coords, &u, &m).unwrap();
    for (c, v) in coords.iter().zip(&u) {
        let p = k.predict(*c);
        assert!((p.u_hat - v).abs() < 1e-10);
        assert!(p.sigma2.abs() < 1e-10);
        let near = k.predict([c[0] + 1e-6, c[1]]);
        assert!((near.u_hat - v).abs() < 1e-5);
        assert!(near.sigma2 < 1e-5);
    }
}

#[test]
fn duplicate_donors_are_averaged() {
    let m = MaternModel::new(0.05, 0.1, 30.0, 1.0).unwrap();
    let dup = krige_point(
        &[[0.0, 0.0], [10.0, 0.0], [0.0, 0.0]],
        &[1.0, 2.0, 3.0],
        &m,
        [4.0, 4.0],
    )
    .unwrap();
    let merged = krige_point(&[[0.0, 0.0], [10.0, 0.0]], &[2.0, 2.0], &m, [4.0, 4.0]).unwrap();
    assert!((dup.u_hat - merged.u_hat).abs() < 1e-14);
    assert_eq!(dup.sigma2, merged.sigma2);
}

fn random_sites(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)])
        .collect()
}

#[test]
fn fast_loo_matches_refitting() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut coords = random_sites(&mut rng, 40);
    coords[7] = coords[3];
    let u: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m = MaternModel::new(0.05, 0.2, 40.0, 0.8).unwrap();
    let out = LooKriger::new(&coords, &m).unwrap().run(&u).unwrap();
    for i in 0..40 {
        if i == 3 || i == 7 {
            continue;
        }
        let keep: Vec<usize> = (0..40).filter(|&j| j != i).collect();
        let c: Vec<[f64; 2]> = keep.iter().map(|&j| coords[j]).collect();
        let v: Vec<f64> = keep.iter().map(|&j| u[j]).collect();
        let p = krige_point(&c, &v, &m, coords[i]).unwrap();
        assert!((p.u_hat - out.u_hat[i]).abs() < 1e-10);
        assert!((p.sigma2 - out.sigma2[i]).abs() < 1e-10);
    }
    // The duplicated pair is left out together and predicted as one location.
    let keep: Vec<usize> = (0..40).filter(|&j| j != 3 && j != 7).collect();
    let c: Vec<[f64; 2]> = keep.iter().map(|&j| coords[j]).collect();
    let v: Vec<f64> = keep.iter().map(|&j| u[j]).collect();
    let p = krige_point(&c, &v, &m, coords[3]).unwrap();
    assert!((p.u_hat - out.u_hat[3]).abs() < 1e-10 && out.u_hat[3] == out.u_hat[7]);
    assert_eq!(out.theta.len(), 39);
}

#[test]
fn theta_scales_inversely_with_model_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coords = random_sites(&mut rng, 60);
    let u: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m = MaternModel::new(0.05, 0.2, 40.0, 0.8).unwrap();
    let a = LooKriger::new(&coords, &m).unwrap().run(&u).unwrap();
    let b = LooKriger::new(&coords, &m.scaled(2.0))
        .unwrap()
        .run(&u)
        .unwrap();
    for (x, y) in a.theta.iter().zip(&b.theta) {
        assert!((x / 2.0 - y).abs() <= 1e-10 * x.abs().max(1e-300));
    }
    let ta = loo_theta(&coords, &u, &m).unwrap();
    let tb = loo_theta(&coords, &u, &m.scaled(2.0)).unwrap();
    assert!((ta.theta_bar / 2.0 - tb.theta_bar).abs() < 1e-10 * ta.theta_bar);
    assert!(loo_theta(&coords[..9], &u[..9], &m).is_err());
}

fn model_field(seed: u64, n: usize, m: &MaternModel) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = random_sites(&mut rng, n);
    let g = GrfSampler::new(&coords, m).unwrap().sample(&mut rng);
    let u = g
        .iter()
        .map(|v| v + m.c0.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (coords, u)
}

#[test]
fn valid_field_needs_no_winsorizing() {
    let m = MaternModel::new(0.05, 0.1, 30.0, 0.5).unwrap();
    let s = WinsorizeSettings::default();
    let mut done = 0;
    for seed in 0..10 {
        let (coords, u) = model_field(seed, 300, &m);
        if !loo_theta(&coords, &u, &m).unwrap().is_valid() {
            continue;
        }
        let r = winsorize(&coords, &u, &m, 0.0, &s, None).unwrap();
        assert_eq!(r.n_flagged(), 0);
        assert_eq!(r.u_star(), u);
        assert!(r.c.is_none());
        done += 1;
    }
    assert!(done >= 5);
}

#[test]
fn gross_outlier_is_flagged_and_clipped() {
    let m = MaternModel::new(0.05, 0.1, 30.0, 0.5).unwrap();
    let (coords, mut u) = model_field(11, 300, &m);
    u[17] += 10.0 * m.sill().sqrt();
    let r = winsorize(&coords, &u, &m, 0.112, &WinsorizeSettings::default(), None).unwrap();
    assert!(r.sites[17].flag);
    assert_eq!(r.sites[17].u_star, r.sites[17].u_plus);
    assert!((r.after.theta_bar - 1.0).abs() < 0.01);
    assert!(r.after.is_valid());
    let c = r.c.unwrap();
    assert!((1.5..=4.0).contains(&c));
    for s in &r.sites {
        if s.flag {
            assert!(s.u_star == s.u_minus || s.u_star == s.u_plus);
            assert!((s.u_star - s.u).abs() <= (s.u - s.u_minus).abs().max((s.u - s.u_plus).abs()));
        } else {
            assert_eq!(s.u_star, s.u);
        }
    }
}

#[test]
fn back_transform_reduces_to_plain_exponential() {
    let m = MaternModel::new(0.0, 0.1, 30.0, 0.5).unwrap();
    let coords = [[0.0, 0.0], [20.0, 5.0], [8.0, 25.0]];
    let p = krige_point(&coords, &[0.0; 3], &m, coords[1]).unwrap();
    assert_eq!(p.u_hat, 0.0);
    let y = predict_lognormal(0.7, &p).unwrap();
    assert!((y - 0.7f64.exp()).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one(seed in any::<u64>(), n in 2usize..30, kappa in 0.1f64..5.0, c0 in 0.0f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = random_sites(&mut rng, n);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = MaternModel::new(c0 + 0.01, 0.1, 25.0, kappa).unwrap();
        let k = Kriger::new(&coords, &u, &m).unwrap();
        let t = [rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)];
        prop_assert!((k.weights(t).iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(k.predict(t).sigma2 >= 0.0);
    }

    #[test]
    fn winsorizing_respects_bounds(seed in 0u64..1000, outliers in 1usize..8) {
        let m = MaternModel::new(0.05, 0.1, 30.0, 0.5).unwrap();
        let (coords, mut u) = model_field(seed, 120, &m);
        for i in 0..outliers {
            u[i * 13] -= 2.0;
        }
        if let Ok(r) = winsorize(&coords, &u, &m, 0.05, &WinsorizeSettings::default(), None) {
            for (s, &orig) in r.sites.iter().zip(&u) {
                prop_assert_eq!(s.u, orig);
                if s.flag {
                    prop_assert!(s.u_star == s.u_minus || s.u_star == s.u_plus);
                    prop_assert!(s.u_minus <= s.u_plus);
                } else {
                    prop_assert_eq!(s.u_star, s.u);
                }
            }
        }
    }
}
