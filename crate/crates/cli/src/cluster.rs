//! `cpclust cluster`: one dataset, one affinity method, labels + report.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use cpclust::dataset::pairwise_distances;
use cpclust::metrics::silhouette;
use cpclust::spectral::spectral_cluster;

use crate::common::{
    self, build_affinity, config_err, ensure_out_dir, external_metrics, load_normalized,
    parse_label_column, write_json, write_labels_csv, CliError, Format, MethodId, MethodParams,
    MetricsBlock, Normalize,
};

#[derive(Args)]
pub struct ClusterArgs {
    /// Input CSV (optional auto-detected header row).
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth label column: header name or 0-based index.
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, value_enum)]
    pub method: MethodId,
    #[arg(long)]
    pub k_clusters: usize,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub k_nn: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// KDE bandwidth for --ncm kde.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Non-conformity measure for the conformal methods.
    #[arg(long, default_value = "knn")]
    pub ncm: String,
    /// Fix the tie-smoothing tau instead of drawing it per pair.
    #[arg(long)]
    pub deterministic_tau: Option<f64>,
    #[arg(long, default_value_t = cpclust::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Normalize::Minmax)]
    pub normalize: Normalize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Dump the dense affinity matrix as CSV (debugging).
    #[arg(long)]
    pub dump_affinity: Option<PathBuf>,
    /// Dump the neighborhood graph edge list as CSV (debugging).
    #[arg(long)]
    pub dump_edges: Option<PathBuf>,
}

#[derive(Serialize)]
struct ClusterReport {
    dataset: String,
    n: usize,
    d: usize,
    method: String,
    builder: String,
    params: MethodParams,
    k_clusters: usize,
    seed: u64,
    normalize: String,
    distortion: f64,
    restarts: usize,
    eigenvalues: Vec<f64>,
    silhouette: Option<f64>,
    metrics: Option<MetricsBlock>,
    warning: Option<String>,
}

pub fn run(args: ClusterArgs) -> Result<(), CliError> {
    if args.k_clusters == 0 {
        return Err(config_err("--k-clusters must be >= 1"));
    }
    let label = parse_label_column(args.label_column.as_deref());
    let data = load_normalized(&args.input, label.as_ref(), args.normalize)?;
    let dm = pairwise_distances(&data);

    let params = MethodParams {
        sigma: args.sigma,
        epsilon: args.epsilon,
        k_nn: args.k_nn,
        gamma: args.gamma,
        bandwidth: args.bandwidth,
        ncm: Some(args.ncm.clone()),
        deterministic_tau: args.deterministic_tau,
    };
    let (affinity, graph) = build_affinity(args.method, &params, &data, &dm, args.seed)?;
    if let Some(w) = affinity.warning() {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.dump_affinity {
        let file = std::fs::File::create(path).map_err(|e| common::io_err(path, e))?;
        affinity.write_csv(std::io::BufWriter::new(file))?;
    }
    if let Some(path) = &args.dump_edges {
        match &graph {
            Some(g) => {
                let file = std::fs::File::create(path).map_err(|e| common::io_err(path, e))?;
                g.write_edge_list(&dm, std::io::BufWriter::new(file))?;
            }
            None => {
                return Err(config_err(format!(
                    "--dump-edges: method `{}` does not build a neighborhood graph",
                    args.method.as_str()
                )))
            }
        }
    }

    // cpsc is asymmetric by definition; cluster on its symmetrized form.
    let affinity = if args.method == MethodId::Cpsc {
        let sym = cpclust::affinity::AffinityMatrix::from_symmetrized(&affinity);
        eprintln!("note: cpsc affinity symmetrized for the spectral pipeline");
        sym
    } else {
        affinity
    };

    let result = spectral_cluster(&affinity, args.k_clusters, args.seed)?;
    let sil = silhouette(&dm, &result.labels).ok();
    let metrics = external_metrics(data.labels(), &result.labels)?;

    ensure_out_dir(&args.out)?;
    write_labels_csv(&args.out.join("labels.csv"), &result.labels)?;

    let report = ClusterReport {
        dataset: args.input.display().to_string(),
        n: data.n(),
        d: data.dim(),
        method: args.method.as_str().to_string(),
        builder: affinity.builder().to_string(),
        params,
        k_clusters: args.k_clusters,
        seed: args.seed,
        normalize: args.normalize.as_str().to_string(),
        distortion: result.distortion,
        restarts: result.restarts,
        eigenvalues: result.eigenvalues.clone(),
        silhouette: sil,
        metrics,
        warning: affinity.warning().map(str::to_string),
    };
    match args.format {
        Format::Json => write_json(&args.out.join("report.json"), &report)?,
        Format::Csv => write_report_csv(&args.out.join("report.csv"), &report)?,
    }
    Ok(())
}

fn write_report_csv(path: &std::path::Path, r: &ClusterReport) -> Result<(), CliError> {
    let mut out = String::from("key,value\n");
    let mut push = |k: &str, v: String| out.push_str(&format!("{k},{v}\n"));
    push("dataset", r.dataset.clone());
    push("n", r.n.to_string());
    push("d", r.d.to_string());
    push("method", r.method.clone());
    push("builder", r.builder.clone());
    push("k_clusters", r.k_clusters.to_string());
    push("seed", r.seed.to_string());
    push("normalize", r.normalize.clone());
    push("distortion", format!("{}", r.distortion));
    push("restarts", r.restarts.to_string());
    if let Some(s) = r.silhouette {
        push("silhouette", format!("{s}"));
    }
    if let Some(m) = &r.metrics {
        push("ari", format!("{}", m.ari));
        push("nmi", format!("{}", m.nmi));
        push("ce", format!("{}", m.ce));
    }
    std::fs::write(path, out).map_err(|e| common::io_err(path, e))?;
    Ok(())
}
