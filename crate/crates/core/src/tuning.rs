//! Unsupervised (epsilon, k) selection by silhouette-maximizing grid
//! search.
//!
//! The grid defaults to epsilon in {0.01, 0.02, ...} up to the maximum
//! pairwise distance, crossed with the non-conformity parameter
//! k in 1..=30 (clamped to n-1). Each cell runs the full conformal
//! spectral pipeline with seeds derived from (seed, epsilon index,
//! k index), scores the labeling with the silhouette index on the input
//! feature space, and failed cells (empty graph, degenerate clustering)
//! are recorded but never abort the sweep. Ties break toward smaller
//! epsilon, then smaller k.

use rayon::prelude::*;
use serde::Serialize;

use crate::affinity::{self, AffinityMatrix};
use crate::conformal::TauMode;
use crate::dataset::{pairwise_distances, Dataset, DistanceMatrix};
use crate::error::{Error, Result};
use crate::graph::build_epsilon_graph;
use crate::metrics::silhouette;
use crate::seed::derive_seed;
use crate::spectral::{spectral_cluster, ClusteringResult};

/// Which conformal affinity the tuner drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TunedAffinity {
    Cpsca,
    Hybrid,
}

impl std::fmt::Display for TunedAffinity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TunedAffinity::Cpsca => write!(f, "cpsca"),
            TunedAffinity::Hybrid => write!(f, "hybrid"),
        }
    }
}

/// Non-conformity family for the sweep. The KNN family takes its k from
/// the grid; the KDE family has a fixed bandwidth, so the k dimension
/// collapses to a single row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TunedNcm {
    Knn,
    Kde { bandwidth: f64 },
}

/// Grid overrides; `None` fields use the defaults.
#[derive(Debug, Clone, Default)]
pub struct GridSpec {
    pub epsilons: Option<Vec<f64>>,
    pub k_values: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    EmptyGraph,
    DegenerateClustering,
    Error(String),
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellStatus::Ok => write!(f, "ok"),
            CellStatus::EmptyGraph => write!(f, "empty_graph"),
            CellStatus::DegenerateClustering => write!(f, "degenerate_clustering"),
            CellStatus::Error(msg) => write!(f, "error: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub epsilon: f64,
    /// Non-conformity k; absent for the KDE family.
    pub k_nn: Option<usize>,
    pub silhouette: Option<f64>,
    pub status: CellStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub variant: String,
    pub best_epsilon: f64,
    pub best_k_nn: Option<usize>,
    pub best_sigma: Option<f64>,
    pub best_silhouette: f64,
    pub result: ClusteringResult,
    pub grid: Vec<GridCell>,
}

impl TuneReport {
    /// Grid rows as `epsilon,k_nn,silhouette,status` CSV.
    pub fn write_grid_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        let werr = |e: std::io::Error| Error::Io {
            path: "<grid csv>".into(),
            source: e,
        };
        writeln!(w, "epsilon,k_nn,silhouette,status").map_err(werr)?;
        for cell in &self.grid {
            let k = cell.k_nn.map_or(String::new(), |k| k.to_string());
            let sil = cell.silhouette.map_or(String::new(), |s| format!("{s}"));
            writeln!(w, "{},{},{},{}", cell.epsilon, k, sil, cell.status).map_err(werr)?;
        }
        Ok(())
    }
}

/// Fallback k for the hybrid sigma estimate when the non-conformity
/// measure has no k of its own.
const SIGMA_FALLBACK_K: usize = 7;

fn default_epsilons(max_dist: f64) -> Vec<f64> {
    let mut eps = Vec::new();
    let mut t = 1u32;
    loop {
        let e = t as f64 * 0.01;
        if e > max_dist {
            break;
        }
        eps.push(e);
        t += 1;
    }
    if eps.is_empty() && max_dist > 0.0 {
        eps.push(max_dist);
    }
    eps
}

struct CellOutcome {
    cell: GridCell,
    candidate: Option<(f64, ClusteringResult, Option<f64>)>, // silhouette, labels, sigma
}

fn evaluate_labels(
    dm: &DistanceMatrix,
    result: ClusteringResult,
    epsilon: f64,
    k_nn: Option<usize>,
    sigma: Option<f64>,
) -> CellOutcome {
    if result.n_distinct_labels() < 2 {
        return CellOutcome {
            cell: GridCell {
                epsilon,
                k_nn,
                silhouette: None,
                status: CellStatus::DegenerateClustering,
            },
            candidate: None,
        };
    }
    match silhouette(dm, &result.labels) {
        Ok(s) => CellOutcome {
            cell: GridCell {
                epsilon,
                k_nn,
                silhouette: Some(s),
                status: CellStatus::Ok,
            },
            candidate: Some((s, result, sigma)),
        },
        Err(e) => CellOutcome {
            cell: GridCell {
                epsilon,
                k_nn,
                silhouette: None,
                status: CellStatus::Error(e.to_string()),
            },
            candidate: None,
        },
    }
}

fn failed_column(epsilon: f64, ks: &[Option<usize>], status: CellStatus) -> Vec<CellOutcome> {
    ks.iter()
        .map(|&k_nn| CellOutcome {
            cell: GridCell {
                epsilon,
                k_nn,
                silhouette: None,
                status: status.clone(),
            },
            candidate: None,
        })
        .collect()
}

/// Silhouette-maximizing sweep over (epsilon, k) for the CPSCA or hybrid
/// affinity. Deterministic for a fixed seed; cells are evaluated
/// independently with derived seeds, so parallel and sequential sweeps
/// agree.
pub fn tune_cpsc(
    data: &Dataset,
    k_clusters: usize,
    variant: TunedAffinity,
    ncm: TunedNcm,
    sigma_override: Option<f64>,
    seed: u64,
    grid: &GridSpec,
) -> Result<TuneReport> {
    if k_clusters < 2 {
        return Err(Error::invalid("k-clusters", "tuning needs k >= 2"));
    }
    let n = data.n();
    if k_clusters > n {
        return Err(Error::invalid(
            "k-clusters",
            format!("{k_clusters} clusters for {n} points"),
        ));
    }
    let dm = pairwise_distances(data);
    let epsilons = match &grid.epsilons {
        Some(list) => {
            let mut e = list.clone();
            e.retain(|v| v.is_finite() && *v >= 0.0);
            e.sort_unstable_by(f64::total_cmp);
            e.dedup();
            e
        }
        None => default_epsilons(dm.max_dist()),
    };
    if epsilons.is_empty() {
        return Err(Error::invalid("grid", "epsilon grid is empty"));
    }
    let k_values: Vec<usize> = match ncm {
        TunedNcm::Kde { bandwidth } => {
            if !(bandwidth.is_finite() && bandwidth > 0.0) {
                return Err(Error::invalid("bandwidth", "must be finite and > 0"));
            }
            Vec::new()
        }
        TunedNcm::Knn => match &grid.k_values {
            Some(list) => {
                let mut k: Vec<usize> = list.iter().copied().filter(|&k| k >= 1).collect();
                k.sort_unstable();
                k.dedup();
                if k.is_empty() {
                    return Err(Error::invalid("grid", "k grid is empty"));
                }
                k
            }
            None => (1..=30.min(n.saturating_sub(1)).max(1)).collect(),
        },
    };
    let k_columns: Vec<Option<usize>> = if k_values.is_empty() {
        vec![None]
    } else {
        k_values.iter().map(|&k| Some(k)).collect()
    };

    let columns: Vec<Vec<CellOutcome>> = epsilons
        .par_iter()
        .enumerate()
        .map(|(ei, &epsilon)| {
            let g = match build_epsilon_graph(&dm, epsilon) {
                Ok(g) => g,
                Err(e) => {
                    return failed_column(epsilon, &k_columns, CellStatus::Error(e.to_string()))
                }
            };
            if g.degree_sum() == 0 {
                return failed_column(epsilon, &k_columns, CellStatus::EmptyGraph);
            }
            match ncm {
                TunedNcm::Knn => {
                    let taus: Vec<TauMode> = (0..k_values.len())
                        .map(|ki| TauMode::Smoothed {
                            seed: derive_seed(seed, &[ei as u64, ki as u64, 0]),
                        })
                        .collect();
                    let batch = match affinity::cpsc_knn_batch(&dm, &g, &k_values, &taus) {
                        Ok(b) => b,
                        Err(e) => {
                            return failed_column(
                                epsilon,
                                &k_columns,
                                CellStatus::Error(e.to_string()),
                            )
                        }
                    };
                    batch
                        .into_iter()
                        .enumerate()
                        .map(|(ki, asym)| {
                            let k_nn = k_values[ki];
                            let values = affinity::symmetrize(&asym);
                            let sigma = match variant {
                                TunedAffinity::Cpsca => None,
                                TunedAffinity::Hybrid => Some(sigma_override.unwrap_or_else(
                                    || affinity::default_hybrid_sigma(&dm, k_nn),
                                )),
                            };
                            let kmeans_seed = derive_seed(seed, &[ei as u64, ki as u64, 1]);
                            run_cell(
                                &dm, values, sigma, epsilon, Some(k_nn), k_clusters, kmeans_seed,
                            )
                        })
                        .collect()
                }
                TunedNcm::Kde { bandwidth } => {
                    let tau = TauMode::Smoothed {
                        seed: derive_seed(seed, &[ei as u64, 0, 0]),
                    };
                    let ncm_spec = crate::conformal::NcmSpec::Kde { bandwidth };
                    let asym = match affinity::cpsc_asymmetric(data, &dm, &g, &ncm_spec, &tau) {
                        Ok(a) => a,
                        Err(e) => {
                            return failed_column(
                                epsilon,
                                &k_columns,
                                CellStatus::Error(e.to_string()),
                            )
                        }
                    };
                    let values = affinity::symmetrize(asym.values());
                    let sigma = match variant {
                        TunedAffinity::Cpsca => None,
                        TunedAffinity::Hybrid => Some(sigma_override.unwrap_or_else(|| {
                            affinity::default_hybrid_sigma(&dm, SIGMA_FALLBACK_K)
                        })),
                    };
                    let kmeans_seed = derive_seed(seed, &[ei as u64, 0, 1]);
                    vec![run_cell(
                        &dm, values, sigma, epsilon, None, k_clusters, kmeans_seed,
                    )]
                }
            }
        })
        .collect();

    struct BestCell {
        silhouette: f64,
        epsilon: f64,
        k_nn: Option<usize>,
        sigma: Option<f64>,
        result: ClusteringResult,
    }
    let mut grid_rows = Vec::with_capacity(columns.iter().map(Vec::len).sum());
    let mut best: Option<BestCell> = None;
    for (column, &epsilon) in columns.into_iter().zip(&epsilons) {
        for outcome in column {
            if let Some((sil, result, sigma)) = outcome.candidate {
                if best.as_ref().is_none_or(|b| sil > b.silhouette) {
                    best = Some(BestCell {
                        silhouette: sil,
                        epsilon,
                        k_nn: outcome.cell.k_nn,
                        sigma,
                        result,
                    });
                }
            }
            grid_rows.push(outcome.cell);
        }
    }

    match best {
        None => Err(Error::Numerical(
            "every grid cell failed; no tunable clustering found".into(),
        )),
        Some(b) => Ok(TuneReport {
            variant: variant.to_string(),
            best_epsilon: b.epsilon,
            best_k_nn: b.k_nn,
            best_sigma: b.sigma,
            best_silhouette: b.silhouette,
            result: b.result,
            grid: grid_rows,
        }),
    }
}

fn run_cell(
    dm: &DistanceMatrix,
    mut values: nalgebra::DMatrix<f64>,
    sigma: Option<f64>,
    epsilon: f64,
    k_nn: Option<usize>,
    k_clusters: usize,
    kmeans_seed: u64,
) -> CellOutcome {
    if let Some(s) = sigma {
        let n = values.nrows();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = dm.get(i, j);
                    values[(i, j)] += (-(d * d) / (2.0 * s * s)).exp();
                }
            }
        }
    }
    let tag = match (k_nn, sigma) {
        (Some(k), Some(s)) => format!("hybrid(knn({k}), eps={epsilon}, sigma={s})"),
        (Some(k), None) => format!("cpsca(knn({k}), eps={epsilon})"),
        (None, Some(s)) => format!("hybrid(kde, eps={epsilon}, sigma={s})"),
        (None, None) => format!("cpsca(kde, eps={epsilon})"),
    };
    let affinity = match AffinityMatrix::from_values(values, tag) {
        Ok(a) => a,
        Err(e) => {
            return CellOutcome {
                cell: GridCell {
                    epsilon,
                    k_nn,
                    silhouette: None,
                    status: CellStatus::Error(e.to_string()),
                },
                candidate: None,
            }
        }
    };
    match spectral_cluster(&affinity, k_clusters, kmeans_seed) {
        Ok(result) => evaluate_labels(dm, result, epsilon, k_nn, sigma),
        Err(e) => CellOutcome {
            cell: GridCell {
                epsilon,
                k_nn,
                silhouette: None,
                status: CellStatus::Error(e.to_string()),
            },
            candidate: None,
        },
    }
}
