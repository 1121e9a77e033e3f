//! Seeded synthetic datasets used as fixtures and in tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;

/// Two isotropic Gaussian blobs centered `separation` apart on the x axis,
/// `n_per` points each, labels 0 and 1.
pub fn two_blobs(n_per: usize, separation: f64, spread: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).expect("finite spread");
    let mut points = Vec::with_capacity(2 * n_per);
    let mut labels = Vec::with_capacity(2 * n_per);
    for c in 0..2 {
        let cx = c as f64 * separation;
        for _ in 0..n_per {
            points.push(vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
            labels.push(c);
        }
    }
    Dataset::new(points, Some(labels), Some(vec!["x".into(), "y".into()]))
        .expect("generator output is valid")
}

/// Two interleaved half-moons with Gaussian coordinate noise, `n_per`
/// points each, labels 0 and 1.
pub fn two_moons(n_per: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).expect("finite noise");
    let mut points = Vec::with_capacity(2 * n_per);
    let mut labels = Vec::with_capacity(2 * n_per);
    for i in 0..n_per {
        let t = std::f64::consts::PI * i as f64 / (n_per.max(2) - 1) as f64;
        points.push(vec![
            t.cos() + jitter.sample(&mut rng),
            t.sin() + jitter.sample(&mut rng),
        ]);
        labels.push(0);
    }
    for i in 0..n_per {
        let t = std::f64::consts::PI * i as f64 / (n_per.max(2) - 1) as f64;
        points.push(vec![
            1.0 - t.cos() + jitter.sample(&mut rng),
            0.5 - t.sin() + jitter.sample(&mut rng),
        ]);
        labels.push(1);
    }
    Dataset::new(points, Some(labels), Some(vec!["x".into(), "y".into()]))
        .expect("generator output is valid")
}
