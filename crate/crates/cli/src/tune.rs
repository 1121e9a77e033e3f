//! `cpclust tune`: unsupervised (epsilon, k) selection for the conformal
//! affinities; writes the grid, the best labels, and a summary report.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use cpclust::spectral::ClusteringResult;
use cpclust::tuning::{tune_cpsc, GridSpec, TunedAffinity, TunedNcm};

use crate::common::{
    self, config_err, ensure_out_dir, external_metrics, load_normalized, parse_label_column,
    write_json, write_labels_csv, CliError, MethodId, MetricsBlock, Normalize,
};

#[derive(Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub label_column: Option<String>,
    /// Tunable methods: cpsca or hybrid.
    #[arg(long, value_enum)]
    pub method: MethodId,
    #[arg(long)]
    pub k_clusters: usize,
    /// Non-conformity family: knn (k swept by the grid) or kde.
    #[arg(long, default_value = "knn")]
    pub ncm: String,
    /// KDE bandwidth, required with --ncm kde.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Fixed Gaussian scale for the hybrid term (default: self-tuned).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Override the epsilon grid (comma-separated values).
    #[arg(long, value_delimiter = ',')]
    pub grid_epsilon: Option<Vec<f64>>,
    /// Override the k grid (comma-separated values).
    #[arg(long, value_delimiter = ',')]
    pub grid_k: Option<Vec<usize>>,
    #[arg(long, default_value_t = cpclust::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Normalize::Minmax)]
    pub normalize: Normalize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct TuneSummary {
    dataset: String,
    n: usize,
    d: usize,
    method: String,
    ncm: String,
    k_clusters: usize,
    seed: u64,
    normalize: String,
    best_epsilon: f64,
    best_k_nn: Option<usize>,
    best_sigma: Option<f64>,
    best_silhouette: f64,
    grid_cells: usize,
    ok_cells: usize,
    result: ClusteringResult,
    metrics: Option<MetricsBlock>,
}

pub fn run(args: TuneArgs) -> Result<(), CliError> {
    let variant = match args.method {
        MethodId::Cpsca => TunedAffinity::Cpsca,
        MethodId::Hybrid => TunedAffinity::Hybrid,
        other => {
            return Err(config_err(format!(
                "tune supports methods cpsca and hybrid, not `{}`",
                other.as_str()
            )))
        }
    };
    let ncm = match args.ncm.as_str() {
        "knn" => TunedNcm::Knn,
        "kde" => TunedNcm::Kde {
            bandwidth: args
                .bandwidth
                .ok_or_else(|| config_err("--ncm kde requires --bandwidth"))?,
        },
        other => return Err(config_err(format!("unknown ncm `{other}`"))),
    };

    let label = parse_label_column(args.label_column.as_deref());
    let data = load_normalized(&args.input, label.as_ref(), args.normalize)?;
    let grid = GridSpec {
        epsilons: args.grid_epsilon.clone(),
        k_values: args.grid_k.clone(),
    };
    let report = tune_cpsc(
        &data,
        args.k_clusters,
        variant,
        ncm,
        args.sigma,
        args.seed,
        &grid,
    )?;

    ensure_out_dir(&args.out)?;
    let grid_path = args.out.join("grid.csv");
    let file = std::fs::File::create(&grid_path).map_err(|e| common::io_err(&grid_path, e))?;
    report.write_grid_csv(std::io::BufWriter::new(file))?;
    write_labels_csv(&args.out.join("labels.csv"), &report.result.labels)?;

    let metrics = external_metrics(data.labels(), &report.result.labels)?;
    let ok_cells = report
        .grid
        .iter()
        .filter(|c| c.status == cpclust::tuning::CellStatus::Ok)
        .count();
    let summary = TuneSummary {
        dataset: args.input.display().to_string(),
        n: data.n(),
        d: data.dim(),
        method: args.method.as_str().to_string(),
        ncm: args.ncm.clone(),
        k_clusters: args.k_clusters,
        seed: args.seed,
        normalize: args.normalize.as_str().to_string(),
        best_epsilon: report.best_epsilon,
        best_k_nn: report.best_k_nn,
        best_sigma: report.best_sigma,
        best_silhouette: report.best_silhouette,
        grid_cells: report.grid.len(),
        ok_cells,
        result: report.result.clone(),
        metrics,
    };
    write_json(&args.out.join("report.json"), &summary)?;
    Ok(())
}
