//! Non-conformity measures and conformal p-values.
//!
//! The p-value of a point `z` against a set `S0` is computed by scoring
//! every element of `D = S0 ∪ {z}` against the rest of `D` with a
//! non-conformity measure and ranking the provisional point's score among
//! them, with ties smoothed by a draw `tau ~ U(0,1]`:
//!
//! ```text
//! P = (#{k: a_k > a_n} + #{k: a_k == a_n} * tau) / |D|
//! ```
//!
//! The equality count always includes the provisional point itself, so the
//! result is strictly positive and at most 1.
//!
//! Score comparisons use exact floating-point equality; every score is
//! produced by the same code path (distances sorted ascending by value,
//! then folded left), so analytically tied configurations compare equal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::euclidean;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Non-conformity measure selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NcmSpec {
    /// Sum of the `k_nn` smallest distances to the reference set.
    Knn { k_nn: usize },
    /// Negated kernel density estimate with Gaussian kernel and bandwidth
    /// `h`; more negative means denser, i.e. more conforming.
    Kde { bandwidth: f64 },
}

impl NcmSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NcmSpec::Knn { k_nn } => {
                if k_nn == 0 {
                    return Err(Error::invalid("k-nn", "must be >= 1"));
                }
            }
            NcmSpec::Kde { bandwidth } => {
                if !(bandwidth.is_finite() && bandwidth > 0.0) {
                    return Err(Error::invalid(
                        "bandwidth",
                        format!("must be finite and > 0, got {bandwidth}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for NcmSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NcmSpec::Knn { k_nn } => write!(f, "knn({k_nn})"),
            NcmSpec::Kde { bandwidth } => write!(f, "kde(h={bandwidth})"),
        }
    }
}

/// How the tie-smoothing `tau` is produced.
///
/// `Smoothed` derives an independent ChaCha stream per consumer (pair of
/// point indices, or stream index), so results do not depend on evaluation
/// order. `Deterministic` fixes `tau` and exists for tests and for exactly
/// reproducible affinity matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauMode {
    Smoothed { seed: u64 },
    Deterministic { tau: f64 },
}

impl TauMode {
    pub fn validate(&self) -> Result<()> {
        if let TauMode::Deterministic { tau } = *self {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::invalid(
                    "tau",
                    format!("deterministic tau must lie in (0, 1], got {tau}"),
                ));
            }
        }
        Ok(())
    }

    /// The two tau draws for the unordered pair `{i, j}`: first for the
    /// entry `(min, max)`, second for `(max, min)`.
    pub fn pair_taus(&self, i: usize, j: usize) -> (f64, f64) {
        match *self {
            TauMode::Deterministic { tau } => (tau, tau),
            TauMode::Smoothed { seed } => {
                let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[lo as u64, hi as u64]));
                let first = 1.0 - rng.random::<f64>();
                let second = 1.0 - rng.random::<f64>();
                (first, second)
            }
        }
    }

    /// Tau for the directed entry `(i, j)`.
    pub fn tau_for(&self, i: usize, j: usize) -> f64 {
        let (first, second) = self.pair_taus(i, j);
        if i <= j {
            first
        } else {
            second
        }
    }

    /// Tau for a standalone evaluation stream (e.g. leave-one-out scans).
    pub fn stream_tau(&self, index: u64) -> f64 {
        match *self {
            TauMode::Deterministic { tau } => tau,
            TauMode::Smoothed { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[index]));
                1.0 - rng.random::<f64>()
            }
        }
    }
}

impl std::fmt::Display for TauMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TauMode::Smoothed { seed } => write!(f, "smoothed({seed})"),
            TauMode::Deterministic { tau } => write!(f, "tau={tau}"),
        }
    }
}

/// Folds the first `count` entries of an ascending slice, left to right.
/// This is the one summation order used for every KNN score in the crate.
#[inline]
pub(crate) fn fold_prefix(sorted: &[f64], count: usize) -> f64 {
    let mut s = 0.0;
    for &v in &sorted[..count] {
        s += v;
    }
    s
}

/// KNN score from raw distances: sort ascending, sum the `min(k, len)`
/// smallest.
pub(crate) fn knn_score(dists: &mut [f64], k_nn: usize) -> f64 {
    dists.sort_unstable_by(f64::total_cmp);
    fold_prefix(dists, k_nn.min(dists.len()))
}

/// The Gaussian kernel `K(u) = exp(-u^2/2) / (2*pi)`.
#[inline]
pub(crate) fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI)
}

/// KDE score from raw distances: `-(1/(len*h^dim)) * sum K(d/h)`, kernel
/// terms folded in ascending distance order.
pub(crate) fn kde_score(dists: &mut [f64], bandwidth: f64, dim: usize) -> f64 {
    dists.sort_unstable_by(f64::total_cmp);
    let mut s = 0.0;
    for &d in dists.iter() {
        s += gaussian_kernel(d / bandwidth);
    }
    -(s / (dists.len() as f64 * bandwidth.powi(dim as i32)))
}

/// Sum of the `min(k_nn, |set|)` smallest distances from `z` to `set`.
pub fn knn_ncm(z: &[f64], set: &[&[f64]], k_nn: usize) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("set", "non-conformity set is empty"));
    }
    if k_nn == 0 {
        return Err(Error::invalid("k-nn", "must be >= 1"));
    }
    let mut dists: Vec<f64> = set.iter().map(|p| euclidean(z, p)).collect();
    Ok(knn_score(&mut dists, k_nn))
}

/// Negated Gaussian-kernel density of `z` over `set` with bandwidth `h`.
pub fn kde_ncm(z: &[f64], set: &[&[f64]], bandwidth: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("set", "non-conformity set is empty"));
    }
    NcmSpec::Kde { bandwidth }.validate()?;
    let mut dists: Vec<f64> = set.iter().map(|p| euclidean(z, p)).collect();
    Ok(kde_score(&mut dists, bandwidth, z.len()))
}

fn score_against(z: &[f64], others: &[&[f64]], ncm: &NcmSpec) -> f64 {
    let mut dists: Vec<f64> = others.iter().map(|p| euclidean(z, p)).collect();
    match *ncm {
        NcmSpec::Knn { k_nn } => knn_score(&mut dists, k_nn),
        NcmSpec::Kde { bandwidth } => kde_score(&mut dists, bandwidth, z.len()),
    }
}

/// Conformal p-value of `z` against `s0` with a pre-drawn `tau` in (0, 1].
///
/// Scores every element of `D = s0 ∪ {z}` against the rest of `D`, then
/// ranks the provisional point's score among all of them.
pub fn p_value(z: &[f64], s0: &[&[f64]], ncm: &NcmSpec, tau: f64) -> Result<f64> {
    if s0.is_empty() {
        return Err(Error::invalid("s0", "p-value needs a non-empty set"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid("tau", format!("must lie in (0, 1], got {tau}")));
    }
    ncm.validate()?;
    let m = s0.len();
    let alpha_n = score_against(z, s0, ncm);

    let mut greater = 0usize;
    let mut equal = 1usize; // the provisional point itself
    let mut others: Vec<&[f64]> = Vec::with_capacity(m);
    for t in 0..m {
        others.clear();
        others.extend(s0.iter().take(t).copied());
        others.extend(s0.iter().skip(t + 1).copied());
        others.push(z);
        let alpha = score_against(s0[t], &others, ncm);
        if alpha > alpha_n {
            greater += 1;
        } else if alpha == alpha_n {
            equal += 1;
        }
    }
    let n = (m + 1) as f64;
    Ok((greater as f64 + equal as f64 * tau) / n)
}
