//! Normalized-Laplacian spectral clustering pipeline: Laplacian, top-k
//! eigenvectors, row normalization, k-means on the embedding.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::affinity::AffinityMatrix;
use crate::error::{Error, Result};
use crate::kmeans::kmeans;

const SYMMETRY_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;

/// Spectral embedding: stacked top eigenvectors and their row-normalized
/// form.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// n x k matrix of eigenvector columns, eigenvalue-descending.
    pub x: DMatrix<f64>,
    /// Row-normalized `x`; all-zero rows stay zero.
    pub y: DMatrix<f64>,
    /// The k largest eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Labels plus diagnostics for one clustering run.
#[derive(Debug, Clone, Serialize)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub k_clusters: usize,
    pub distortion: f64,
    pub seed: u64,
    pub eigenvalues: Vec<f64>,
    pub restarts: usize,
}

impl ClusteringResult {
    pub fn n_distinct_labels(&self) -> usize {
        let mut seen = vec![false; self.k_clusters];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }
}

/// `L = D^{-1/2} A D^{-1/2}` with `D_ii` the row sums of `A`. Zero-degree
/// rows use `D_ii = 1`, which leaves their rows zero. The input must be
/// symmetric within 1e-12; the output is exactly symmetric.
pub fn normalized_laplacian(a: &AffinityMatrix) -> Result<DMatrix<f64>> {
    let n = a.n();
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::Numerical(format!(
            "affinity {} is asymmetric (max |A_ij - A_ji| = {asym:e})",
            a.builder()
        )));
    }
    let values = a.values();
    let inv_sqrt_degree: Vec<f64> = (0..n)
        .map(|i| {
            let deg: f64 = (0..n).map(|j| values[(i, j)]).sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = values[(i, j)] * inv_sqrt_degree[i] * inv_sqrt_degree[j];
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    Ok(l)
}

/// The `k` largest eigenpairs of a symmetric matrix, eigenvalues
/// descending, each eigenvector's largest-magnitude entry made positive.
pub fn top_k_eigenvectors(l: &DMatrix<f64>, k: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = l.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(
            "k-clusters",
            format!("need 1 <= k <= {n}, got {k}"),
        ));
    }
    let eig = l.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut x = DMatrix::zeros(n, k);
    let mut eigenvalues = Vec::with_capacity(k);
    let norm_l = l.norm(); // Frobenius
    let tol = RESIDUAL_TOL * norm_l.max(1.0);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let v = eig.eigenvectors.column(idx);
        // Deterministic sign: first entry of largest magnitude is positive.
        let mut arg = 0usize;
        for r in 1..n {
            if v[r].abs() > v[arg].abs() {
                arg = r;
            }
        }
        let flip = if v[arg] < 0.0 { -1.0 } else { 1.0 };
        let residual = (l * v - lambda * v).norm();
        if residual > tol {
            return Err(Error::Numerical(format!(
                "eigenpair residual {residual:e} exceeds {tol:e}"
            )));
        }
        for r in 0..n {
            x[(r, col)] = flip * v[r];
        }
        eigenvalues.push(lambda);
    }
    Ok((x, eigenvalues))
}

/// Normalizes each row to unit Euclidean length; all-zero rows stay zero.
pub fn row_normalize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = x.clone();
    for mut row in y.row_iter_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    y
}

/// Laplacian, eigenvectors, and row normalization in one step.
pub fn spectral_embed(a: &AffinityMatrix, k: usize) -> Result<SpectralEmbedding> {
    let l = normalized_laplacian(a)?;
    let (x, eigenvalues) = top_k_eigenvectors(&l, k)?;
    let y = row_normalize(&x);
    Ok(SpectralEmbedding { x, y, eigenvalues })
}

/// Full pipeline: embed with the top `k_clusters` eigenvectors and cluster
/// the normalized rows with seeded k-means. Point `i` receives the label
/// of embedding row `i`.
pub fn spectral_cluster(
    a: &AffinityMatrix,
    k_clusters: usize,
    seed: u64,
) -> Result<ClusteringResult> {
    let embedding = spectral_embed(a, k_clusters)?;
    let rows: Vec<Vec<f64>> = (0..embedding.y.nrows())
        .map(|i| embedding.y.row(i).iter().copied().collect())
        .collect();
    let km = kmeans(&rows, k_clusters, seed)?;
    Ok(ClusteringResult {
        labels: km.labels,
        k_clusters,
        distortion: km.distortion,
        seed,
        eigenvalues: embedding.eigenvalues,
        restarts: km.restarts,
    })
}
