//! `cpclust benchmark`: run every dataset x method cell of a manifest and
//! emit one table per metric plus a machine-readable record of all runs.
//!
//! Cell failures land in the tables as "ERR" and never abort the sweep;
//! the exit status is nonzero only when every cell fails. `runs.json` is
//! byte-identical across reruns with the same manifest and seed; wall
//! times go to a separate `timings.csv`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cpclust::dataset::{pairwise_distances, Dataset};
use cpclust::metrics::silhouette;
use cpclust::seed::derive_seed;
use cpclust::spectral::spectral_cluster;
use cpclust::tuning::{tune_cpsc, GridSpec, TunedAffinity, TunedNcm};
use cpclust::Error as CoreError;

use crate::common::{
    self, build_affinity, config_err, ensure_out_dir, load_normalized, parse_label_column,
    write_json, CliError, MethodId, MethodParams, Normalize,
};

#[derive(Args)]
pub struct BenchmarkArgs {
    /// JSON manifest listing datasets[] and methods[].
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = cpclust::DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for cell evaluation (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Deserialize)]
struct Manifest {
    datasets: Vec<ManifestDataset>,
    methods: Vec<ManifestMethod>,
}

#[derive(Deserialize)]
struct ManifestDataset {
    #[serde(default)]
    name: Option<String>,
    path: String,
    #[serde(default)]
    label_column: Option<String>,
    k_clusters: usize,
    #[serde(default)]
    normalize: Option<String>,
}

#[derive(Deserialize, Clone)]
struct ManifestMethod {
    id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    tune: bool,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    k_nn: Option<usize>,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    bandwidth: Option<f64>,
    #[serde(default)]
    ncm: Option<String>,
    #[serde(default)]
    deterministic_tau: Option<f64>,
    #[serde(default)]
    grid_epsilon: Option<Vec<f64>>,
    #[serde(default)]
    grid_k: Option<Vec<usize>>,
}

impl ManifestMethod {
    fn column_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            if self.tune {
                format!("{}_tuned", self.id)
            } else {
                self.id.clone()
            }
        })
    }
}

#[derive(Serialize, Clone)]
struct ChosenParams {
    epsilon: f64,
    k_nn: Option<usize>,
    sigma: Option<f64>,
}

#[derive(Serialize, Clone)]
struct RunRecord {
    dataset: String,
    method: String,
    seed: u64,
    status: String,
    ari: Option<f64>,
    nmi: Option<f64>,
    ce: Option<f64>,
    silhouette: Option<f64>,
    chosen: Option<ChosenParams>,
}

fn dataset_name(d: &ManifestDataset) -> String {
    d.name.clone().unwrap_or_else(|| {
        Path::new(&d.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| d.path.clone())
    })
}

fn run_cell(
    data: &Dataset,
    dataset_label: &str,
    k_clusters: usize,
    method: &ManifestMethod,
    cell_seed: u64,
) -> RunRecord {
    let mut record = RunRecord {
        dataset: dataset_label.to_string(),
        method: method.column_name(),
        seed: cell_seed,
        status: "ok".into(),
        ari: None,
        nmi: None,
        ce: None,
        silhouette: None,
        chosen: None,
    };
    let outcome = (|| -> Result<(), CliError> {
        let labels: Vec<usize>;
        if method.tune {
            let variant = match method.id.as_str() {
                "cpsca" => TunedAffinity::Cpsca,
                "hybrid" => TunedAffinity::Hybrid,
                other => {
                    return Err(config_err(format!(
                        "tune: true is only valid for cpsca/hybrid, not `{other}`"
                    )))
                }
            };
            let ncm = match method.ncm.as_deref() {
                None | Some("knn") => TunedNcm::Knn,
                Some("kde") => TunedNcm::Kde {
                    bandwidth: method
                        .bandwidth
                        .ok_or_else(|| config_err("ncm kde requires bandwidth"))?,
                },
                Some(other) => return Err(config_err(format!("unknown ncm `{other}`"))),
            };
            let grid = GridSpec {
                epsilons: method.grid_epsilon.clone(),
                k_values: method.grid_k.clone(),
            };
            let report = tune_cpsc(
                data,
                k_clusters,
                variant,
                ncm,
                method.sigma,
                cell_seed,
                &grid,
            )?;
            record.silhouette = Some(report.best_silhouette);
            record.chosen = Some(ChosenParams {
                epsilon: report.best_epsilon,
                k_nn: report.best_k_nn,
                sigma: report.best_sigma,
            });
            labels = report.result.labels;
        } else {
            let id = MethodId::parse(&method.id)
                .ok_or_else(|| config_err(format!("unknown method id `{}`", method.id)))?;
            let params = MethodParams {
                sigma: method.sigma,
                epsilon: method.epsilon,
                k_nn: method.k_nn,
                gamma: method.gamma,
                bandwidth: method.bandwidth,
                ncm: method.ncm.clone(),
                deterministic_tau: method.deterministic_tau,
            };
            let dm = pairwise_distances(data);
            let (affinity, _) = build_affinity(id, &params, data, &dm, cell_seed)?;
            let affinity = if id == MethodId::Cpsc {
                cpclust::affinity::AffinityMatrix::from_symmetrized(&affinity)
            } else {
                affinity
            };
            let result = spectral_cluster(&affinity, k_clusters, cell_seed)?;
            record.silhouette = silhouette(&dm, &result.labels).ok();
            labels = result.labels;
        }
        if let Some(truth) = data.labels() {
            record.ari = Some(cpclust::metrics::ari(truth, &labels)?);
            record.nmi = Some(cpclust::metrics::nmi(truth, &labels)?);
            record.ce = Some(cpclust::metrics::clustering_error(truth, &labels)?);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        record.status = format!("error: {e}");
    }
    record
}

pub fn run(args: BenchmarkArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.manifest)
        .map_err(|e| common::io_err(&args.manifest, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Core(CoreError::Data(format!("manifest: {e}"))))?;
    if manifest.datasets.is_empty() || manifest.methods.is_empty() {
        return Err(config_err("manifest needs at least one dataset and one method"));
    }

    // Load every dataset once; a load failure marks the whole row.
    let loaded: Vec<Result<Dataset, String>> = manifest
        .datasets
        .iter()
        .map(|d| {
            let normalize = match d.normalize.as_deref() {
                None => Normalize::Minmax,
                Some(s) => Normalize::parse(s)
                    .ok_or_else(|| format!("unknown normalize `{s}`"))?,
            };
            let label = parse_label_column(d.label_column.as_deref());
            load_normalized(Path::new(&d.path), label.as_ref(), normalize)
                .map_err(|e| e.to_string())
        })
        .collect();

    let cells: Vec<(usize, usize)> = (0..manifest.datasets.len())
        .flat_map(|di| (0..manifest.methods.len()).map(move |mi| (di, mi)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| config_err(format!("--jobs: {e}")))?;
    let results: Vec<(RunRecord, u128)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(di, mi)| {
                let ds_entry = &manifest.datasets[di];
                let method = &manifest.methods[mi];
                let name = dataset_name(ds_entry);
                let cell_seed = derive_seed(args.seed, &[di as u64, mi as u64]);
                let start = Instant::now();
                let record = match &loaded[di] {
                    Ok(data) => run_cell(data, &name, ds_entry.k_clusters, method, cell_seed),
                    Err(msg) => RunRecord {
                        dataset: name,
                        method: method.column_name(),
                        seed: cell_seed,
                        status: format!("error: {msg}"),
                        ari: None,
                        nmi: None,
                        ce: None,
                        silhouette: None,
                        chosen: None,
                    },
                };
                (record, start.elapsed().as_millis())
            })
            .collect()
    });

    ensure_out_dir(&args.out)?;
    let records: Vec<&RunRecord> = results.iter().map(|(r, _)| r).collect();
    let n_methods = manifest.methods.len();
    let method_names: Vec<String> = manifest.methods.iter().map(|m| m.column_name()).collect();
    let dataset_names: Vec<String> = manifest.datasets.iter().map(dataset_name).collect();

    for (file, pick) in [
        ("ari.csv", (|r: &RunRecord| r.ari) as fn(&RunRecord) -> Option<f64>),
        ("nmi.csv", |r: &RunRecord| r.nmi),
        ("ce.csv", |r: &RunRecord| r.ce),
    ] {
        let mut out = String::new();
        out.push_str(&format!("dataset,{}\n", method_names.join(",")));
        for (di, ds) in dataset_names.iter().enumerate() {
            let mut row = vec![ds.clone()];
            for mi in 0..n_methods {
                let r = records[di * n_methods + mi];
                row.push(if r.status != "ok" {
                    "ERR".to_string()
                } else {
                    pick(r).map_or(String::new(), |v| format!("{v:.4}"))
                });
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let path = args.out.join(file);
        std::fs::write(&path, out).map_err(|e| common::io_err(&path, e))?;
    }

    write_json(&args.out.join("runs.json"), &records)?;

    let mut timings = String::from("dataset,method,wall_ms\n");
    for (r, ms) in &results {
        timings.push_str(&format!("{},{},{ms}\n", r.dataset, r.method));
    }
    let tpath = args.out.join("timings.csv");
    std::fs::write(&tpath, timings).map_err(|e| common::io_err(&tpath, e))?;

    let failures = results.iter().filter(|(r, _)| r.status != "ok").count();
    for (r, _) in &results {
        if r.status != "ok" {
            eprintln!("{} / {}: {}", r.dataset, r.method, r.status);
        }
    }
    if failures == results.len() {
        return Err(CliError::Core(CoreError::Numerical(
            "every benchmark cell failed".into(),
        )));
    }
    Ok(())
}
