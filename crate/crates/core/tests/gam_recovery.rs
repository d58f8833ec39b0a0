use std::time::Instant;

use fuma::features::{dummy_indices, feature_index, FeatureVector, REGISTRY};
use fuma::gam::{fit_gam, GamConfig, GamModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Every feature uniform on [0,1], dummies drawn as a frequency indicator.
fn synthetic_rows(n: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dummies = dummy_indices();
    (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..REGISTRY.len()).map(|_| rng.random::<f64>()).collect();
            let kind = rng.random_range(0..3);
            v[dummies[0]] = (kind > 0) as u8 as f64;
            v[dummies[1]] = (kind == 1) as u8 as f64;
            v[dummies[2]] = (kind == 2) as u8 as f64;
            FeatureVector::from_values(v).unwrap()
        })
        .collect()
}

fn centred_rmse(model: &GamModel, feature: &str, truth: impl Fn(f64) -> f64) -> f64 {
    let grid: Vec<f64> = (0..=100).map(|i| 0.01 + 0.98 * i as f64 / 100.0).collect();
    let effect = model.partial_effect(feature, &grid).unwrap();
    let t: Vec<f64> = grid.iter().map(|&g| truth(g)).collect();
    let tm = t.iter().sum::<f64>() / t.len() as f64;
    let em = effect.iter().map(|e| e.1).sum::<f64>() / t.len() as f64;
    let sq: f64 = effect.iter().zip(&t).map(|(e, t)| (e.1 - em - (t - tm)).powi(2)).sum();
    (sq / t.len() as f64).sqrt()
}

#[test]
fn full_registry_recovers_known_effects() {
    let rows = synthetic_rows(2000, 1);
    let acf = feature_index("x-acf1").unwrap();
    let ss = feature_index("seasonal-strength").unwrap();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 2.0 * r.values()[acf] + (3.0 * r.values()[ss]).sin() + noise.sample(&mut rng))
        .collect();
    let start = Instant::now();
    let (model, diag) = fit_gam(&rows, &y, "synthetic", &GamConfig::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    eprintln!("fit: {elapsed:.2}s, {} cycles, gcv {:.3e}", diag.cycles, diag.gcv);
    assert!(diag.ridge);
    assert!(centred_rmse(&model, "x-acf1", |v| 2.0 * v) < 0.05);
    assert!(centred_rmse(&model, "seasonal-strength", |v| (3.0 * v).sin()) < 0.1);
    assert!(elapsed < 60.0);
}
