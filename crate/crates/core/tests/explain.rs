use proptest::prelude::*;
use rand::Rng;
use tbrisk::data::FeatureMatrix;
use tbrisk::explain::{local_surrogate, shapley_sample, SurrogateConfig, TrainStats};
use tbrisk::models::{fit, FnScorer, GbdtParams, ModelSpec};
use tbrisk::seed;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Exact Shapley values with a single reference row, by enumerating every coalition.
fn brute_force_shapley(f: &dyn Fn(&[f64]) -> f64, x: &[f64], b: &[f64]) -> Vec<f64> {
    let d = x.len();
    let value = |mask: usize| {
        let z: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { x[j] } else { b[j] }).collect();
        f(&z)
    };
    (0..d)
        .map(|j| {
            let mut phi = 0.0;
            for mask in 0..(1usize << d) {
                if mask >> j & 1 == 1 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let w = factorial(s) * factorial(d - s - 1) / factorial(d);
                phi += w * (value(mask | 1 << j) - value(mask));
            }
            phi
        })
        .collect()
}

#[test]
fn additive_model_matches_closed_form_and_enumeration() {
    let c = [0.7, -1.3, 2.0, 0.25];
    let f = move |r: &[f64]| r.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    let x = [1.5, -2.0, 0.3, 4.0];
    let b = [0.5, 1.0, -1.0, 2.0];
    let oracle = brute_force_shapley(&f, &x, &b);
    let scorer = FnScorer { width: 4, f };
    let bg = FeatureMatrix::from_rows(&[b.to_vec()]).unwrap();
    let a = shapley_sample(&scorer, &x, &bg, 30, 9).unwrap();
    for j in 0..4 {
        let closed = c[j] * (x[j] - b[j]);
        assert!((oracle[j] - closed).abs() < 1e-12);
        assert!((a.contributions[j] - closed).abs() < 1e-12, "{j}: {} vs {closed}", a.contributions[j]);
    }
}

#[test]
fn sampled_values_converge_to_enumeration_for_interactions() {
    let f = |r: &[f64]| (r[0] * r[1] - r[2] + r[3] * r[0] * r[2]).tanh();
    let x = [1.0, 0.5, -0.4, 2.0];
    let b = [-0.3, 1.2, 0.6, -1.0];
    let oracle = brute_force_shapley(&f, &x, &b);
    let scorer = FnScorer { width: 4, f };
    let bg = FeatureMatrix::from_rows(&[b.to_vec()]).unwrap();
    let a = shapley_sample(&scorer, &x, &bg, 4000, 2).unwrap();
    for j in 0..4 {
        let tol = 4.0 * a.std_errors[j] + 1e-12;
        assert!((a.contributions[j] - oracle[j]).abs() <= tol, "{j}: {} vs {}", a.contributions[j], oracle[j]);
    }
    assert!(a.efficiency_gap().abs() < 1e-12);
}

fn noisy(n: usize, d: usize, s: u64) -> (FeatureMatrix, Vec<u8>) {
    let mut rng = seed::rng(s);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let r: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        y.push(u8::from(r[0] + 0.8 * r[1] * r[2] + rng.random_range(-0.8..0.8) > 0.2));
        rows.push(r);
    }
    (FeatureMatrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn efficiency_holds_within_three_standard_errors() {
    let (x, y) = noisy(600, 5, 1);
    let spec = ModelSpec::Gbdt(GbdtParams {
        rounds: 40,
        max_depth: 3,
        ..Default::default()
    });
    let m = fit(&spec, &x, &y, 0).unwrap();
    // 200 permutations over 150 rows leaves a partial pass with sampling error.
    let bg = x.take(&(0..150).collect::<Vec<_>>());
    for i in 0..50 {
        let a = shapley_sample(&m, x.row(300 + i), &bg, 200, i as u64).unwrap();
        let se = a.efficiency_std_error.unwrap();
        assert!(se > 0.0);
        // 1e-12 absorbs floating-point rounding in the telescoping sums.
        assert!(a.efficiency_gap().abs() <= 3.0 * se + 1e-12, "instance {i}: gap {} se {se}", a.efficiency_gap());
    }
}

#[test]
fn duplicated_columns_share_credit() {
    let f = |r: &[f64]| 1.0 / (1.0 + (-(r[0] + r[1] + 0.5 * r[2])).exp());
    let scorer = FnScorer { width: 3, f };
    let mut rng = seed::rng(4);
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let v = rng.random_range(-1.0..1.0);
            vec![v, v, rng.random_range(-1.0..1.0)]
        })
        .collect();
    let bg = FeatureMatrix::from_rows(&rows).unwrap();
    let a = shapley_sample(&scorer, &[1.5, 1.5, 0.2], &bg, 2000, 3).unwrap();
    let tol = 4.0 * (a.std_errors[0].powi(2) + a.std_errors[1].powi(2)).sqrt();
    assert!((a.contributions[0] - a.contributions[1]).abs() <= tol);
}

#[test]
fn attributions_are_seed_stable_across_threads() {
    let (x, y) = noisy(300, 4, 2);
    let m = fit(&ModelSpec::defaults("random_forest").unwrap(), &x, &y, 1).unwrap();
    let bg = x.take(&(0..40).collect::<Vec<_>>());
    let stats = TrainStats::numeric(&x).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                (
                    shapley_sample(&m, x.row(5), &bg, 300, 7).unwrap(),
                    local_surrogate(&m, x.row(5), &SurrogateConfig::default(), &stats).unwrap(),
                )
            })
    };
    let (a1, s1) = run(1);
    let (a4, s4) = run(4);
    assert_eq!(a1, a4);
    assert_eq!(s1, s4);
    let a2 = shapley_sample(&m, x.row(5), &bg, 300, 8).unwrap();
    assert_ne!(a1, a2);
}

#[test]
fn surrogate_recovers_linear_coefficients() {
    let c = [0.8, -2.5, 0.05, 1.7, -0.6];
    let f = move |r: &[f64]| r.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() + 0.25;
    let scorer = FnScorer { width: 5, f };
    let (train, _) = noisy(500, 5, 3);
    let stats = TrainStats::numeric(&train).unwrap();
    for s in 0..10 {
        let cfg = SurrogateConfig {
            n_samples: 5000,
            ridge: 1e-9,
            seed: s,
            ..Default::default()
        };
        let fitted = local_surrogate(&scorer, train.row(s as usize), &cfg, &stats).unwrap();
        for j in 0..5 {
            let rel = (fitted.coefficients[j] - c[j]).abs() / c[j].abs();
            assert!(rel < 0.05, "seed {s} feature {j}: {} vs {}", fitted.coefficients[j], c[j]);
        }
        assert!(fitted.r_squared > 0.999);
        assert_eq!(fitted.top_features[0].0, "x1");
    }
}

#[test]
fn surrogate_sign_on_monotone_booster() {
    let rows: Vec<Vec<f64>> = (0..400).map(|i| vec![i as f64 / 40.0]).collect();
    let mut rng = seed::rng(5);
    let y: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-(r[0] - 5.0)).exp())))
        .collect();
    let x = FeatureMatrix::from_rows(&rows).unwrap();
    let spec = ModelSpec::Gbdt(GbdtParams {
        rounds: 30,
        max_depth: 2,
        ..Default::default()
    });
    let m = fit(&spec, &x, &y, 0).unwrap();
    assert_eq!(m.n_features(), 1);
    let stats = TrainStats::numeric(&x).unwrap();
    let s = local_surrogate(&m, &[5.0], &SurrogateConfig::default(), &stats).unwrap();
    assert!(s.coefficients[0] > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ignored_feature_gets_exactly_zero(s in 0u64..1000, n in 1usize..20) {
        let mut rng = seed::rng(s);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let bg = FeatureMatrix::from_rows(&rows).unwrap();
        let scorer = FnScorer { width: 3, f: |r: &[f64]| (r[0] * r[2]).sin() };
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a = shapley_sample(&scorer, &x, &bg, 25, s).unwrap();
        prop_assert_eq!(a.contributions[1], 0.0);
    }
}
