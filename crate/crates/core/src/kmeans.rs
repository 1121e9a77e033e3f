//! Seeded k-means with careful seeding and Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::derive_seed;

const RESTARTS: usize = 10;
const MAX_ITERATIONS: usize = 300;
const MOVEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    pub labels: Vec<usize>,
    pub distortion: f64,
    pub restarts: usize,
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

/// Careful seeding: first center uniform, each next center drawn with
/// probability proportional to squared distance from the chosen centers.
fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut weight: Vec<f64> = points.iter().map(|p| dist_sq(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = weight.iter().sum();
        let idx = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in weight.iter().enumerate() {
                cum += w;
                if cum > r {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].clone());
        for (w, p) in weight.iter_mut().zip(points) {
            *w = w.min(dist_sq(p, centers.last().unwrap()));
        }
    }
    centers
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &mut [usize]) {
    for (i, p) in points.iter().enumerate() {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let d = dist_sq(p, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
    }
}

fn distortion(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| dist_sq(p, &centers[l]))
        .sum()
}

fn lloyd(points: &[Vec<f64>], k: usize, seed: u64) -> (Vec<usize>, f64) {
    let n = points.len();
    let d = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(points, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut prev_distortion = f64::INFINITY;

    for _ in 0..MAX_ITERATIONS {
        assign(points, &centers, &mut labels);
        if cfg!(debug_assertions) {
            let cur = distortion(points, &centers, &labels);
            debug_assert!(
                cur <= prev_distortion * (1.0 + 1e-12) + 1e-12,
                "distortion increased: {prev_distortion} -> {cur}"
            );
            prev_distortion = cur;
        }

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut movement = 0.0f64;
        for c in 0..k {
            let new_center: Vec<f64> = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                // Empty cluster: reseed to the point farthest from its old
                // centroid (lowest index on ties).
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|(ai, a), (bi, b)| {
                        dist_sq(a, &centers[c])
                            .total_cmp(&dist_sq(b, &centers[c]))
                            .then(bi.cmp(ai))
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                points[far].clone()
            };
            movement = movement.max(dist_sq(&new_center, &centers[c]).sqrt());
            centers[c] = new_center;
        }
        if movement < MOVEMENT_TOL {
            break;
        }
    }
    assign(points, &centers, &mut labels);
    let dist = distortion(points, &centers, &labels);
    (labels, dist)
}

/// Runs k-means `RESTARTS` times with seeds derived from `seed` and keeps
/// the lowest-distortion run. Deterministic for a fixed seed.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KmeansOutcome> {
    let n = points.len();
    if k == 0 {
        return Err(Error::invalid("k-clusters", "must be >= 1"));
    }
    if k > n {
        return Err(Error::invalid(
            "k-clusters",
            format!("{k} clusters requested for {n} points"),
        ));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..RESTARTS {
        let run = lloyd(points, k, derive_seed(seed, &[r as u64]));
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (labels, distortion) = best.expect("at least one restart");
    Ok(KmeansOutcome {
        labels,
        distortion,
        restarts: RESTARTS,
    })
}
