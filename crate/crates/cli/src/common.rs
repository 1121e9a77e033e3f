//! Shared CLI plumbing: argument enums, dataset loading, method dispatch,
//! output writers, exit codes.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

use cpclust::affinity::{self, AffinityMatrix};
use cpclust::conformal::{NcmSpec, TauMode};
use cpclust::dataset::{self, Dataset, DistanceMatrix, LabelColumn};
use cpclust::graph::{self, NeighborhoodGraph};
use cpclust::metrics;
use cpclust::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Config(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

/// Exit codes: 1 configuration, 2 data, 3 numerical failure.
pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Config(_) => 1,
        CliError::Core(CoreError::InvalidParameter { .. }) => 1,
        CliError::Core(CoreError::Data(_))
        | CliError::Core(CoreError::Parse { .. })
        | CliError::Core(CoreError::Io { .. }) => 2,
        CliError::Core(CoreError::Numerical(_)) => 3,
    }
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodId {
    /// Plain Gaussian affinity.
    Njw,
    #[value(name = "local_scale")]
    LocalScale,
    Cnn,
    Np,
    Snn,
    Csnn,
    Pg,
    Cpsc,
    Cpsca,
    Hybrid,
}

impl MethodId {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodId::Njw => "njw",
            MethodId::LocalScale => "local_scale",
            MethodId::Cnn => "cnn",
            MethodId::Np => "np",
            MethodId::Snn => "snn",
            MethodId::Csnn => "csnn",
            MethodId::Pg => "pg",
            MethodId::Cpsc => "cpsc",
            MethodId::Cpsca => "cpsca",
            MethodId::Hybrid => "hybrid",
        }
    }

    pub fn parse(id: &str) -> Option<MethodId> {
        Some(match id {
            "njw" => MethodId::Njw,
            "local_scale" => MethodId::LocalScale,
            "cnn" => MethodId::Cnn,
            "np" => MethodId::Np,
            "snn" => MethodId::Snn,
            "csnn" => MethodId::Csnn,
            "pg" => MethodId::Pg,
            "cpsc" => MethodId::Cpsc,
            "cpsca" => MethodId::Cpsca,
            "hybrid" => MethodId::Hybrid,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NcmKind {
    Knn,
    Kde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalize {
    Minmax,
    Zscore,
    None,
}

impl Normalize {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalize::Minmax => "minmax",
            Normalize::Zscore => "zscore",
            Normalize::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Normalize> {
        Some(match s {
            "minmax" => Normalize::Minmax,
            "zscore" => Normalize::Zscore,
            "none" => Normalize::None,
            _ => return None,
        })
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        match self {
            Normalize::Minmax => dataset::normalize_minmax(ds),
            Normalize::Zscore => dataset::normalize_zscore(ds),
            Normalize::None => ds.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// `--label-column` accepts a header name or a 0-based column index.
pub fn parse_label_column(raw: Option<&str>) -> Option<LabelColumn> {
    raw.map(|s| match s.parse::<usize>() {
        Ok(i) => LabelColumn::Index(i),
        Err(_) => LabelColumn::Name(s.to_string()),
    })
}

pub fn load_normalized(
    input: &Path,
    label_column: Option<&LabelColumn>,
    normalize: Normalize,
) -> Result<Dataset, CliError> {
    let raw = dataset::load_csv(input, label_column)?;
    Ok(normalize.apply(&raw))
}

/// Method parameters as given on the command line or in a manifest row.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MethodParams {
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub k_nn: Option<usize>,
    pub gamma: Option<f64>,
    pub bandwidth: Option<f64>,
    pub ncm: Option<String>,
    pub deterministic_tau: Option<f64>,
}

impl MethodParams {
    fn require(&self, field: &str, method: &str) -> Result<f64, CliError> {
        let v = match field {
            "sigma" => self.sigma,
            "epsilon" => self.epsilon,
            "gamma" => self.gamma,
            "bandwidth" => self.bandwidth,
            _ => None,
        };
        v.ok_or_else(|| config_err(format!("method `{method}` requires --{field}")))
    }

    fn require_k(&self, method: &str) -> Result<usize, CliError> {
        self.k_nn
            .ok_or_else(|| config_err(format!("method `{method}` requires --k-nn")))
    }

    pub fn ncm_kind(&self) -> Result<NcmKind, CliError> {
        match self.ncm.as_deref() {
            None | Some("knn") => Ok(NcmKind::Knn),
            Some("kde") => Ok(NcmKind::Kde),
            Some(other) => Err(config_err(format!(
                "unknown ncm `{other}` (expected knn or kde)"
            ))),
        }
    }

    pub fn ncm_spec(&self, method: &str) -> Result<NcmSpec, CliError> {
        match self.ncm_kind()? {
            NcmKind::Knn => Ok(NcmSpec::Knn {
                k_nn: self.require_k(method)?,
            }),
            NcmKind::Kde => Ok(NcmSpec::Kde {
                bandwidth: self.require("bandwidth", method)?,
            }),
        }
    }

    pub fn tau_mode(&self, seed: u64) -> Result<TauMode, CliError> {
        let mode = match self.deterministic_tau {
            Some(tau) => TauMode::Deterministic { tau },
            None => TauMode::Smoothed { seed },
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// Builds the requested affinity. Also returns the neighborhood graph when
/// the method uses one, for the optional edge-list dump.
pub fn build_affinity(
    method: MethodId,
    params: &MethodParams,
    data: &Dataset,
    dm: &DistanceMatrix,
    seed: u64,
) -> Result<(AffinityMatrix, Option<NeighborhoodGraph>), CliError> {
    let m = method.as_str();
    match method {
        MethodId::Njw => {
            let a = affinity::gaussian_affinity(dm, params.require("sigma", m)?)?;
            Ok((a, None))
        }
        MethodId::LocalScale => {
            let a = affinity::local_scale_affinity(dm, params.require_k(m)?)?;
            Ok((a, None))
        }
        MethodId::Cnn => {
            let sigma = params.require("sigma", m)?;
            let g = match (params.epsilon, params.k_nn) {
                (Some(eps), _) => graph::build_epsilon_graph(dm, eps)?,
                (None, Some(k)) => graph::build_knn_graph(dm, k)?,
                (None, None) => {
                    return Err(config_err(
                        "method `cnn` requires --epsilon (epsilon graph) or --k-nn (kNN graph)",
                    ))
                }
            };
            let a = affinity::cnn_affinity(dm, sigma, &g)?;
            Ok((a, Some(g)))
        }
        MethodId::Np => {
            let sigma = params.require("sigma", m)?;
            let eps = params.require("epsilon", m)?;
            let a = affinity::np_affinity(dm, sigma, eps)?;
            Ok((a, None))
        }
        MethodId::Snn => {
            let k = params.require_k(m)?;
            let g = graph::build_knn_graph(dm, k)?;
            let a = affinity::snn_affinity(&g, k)?;
            Ok((a, Some(g)))
        }
        MethodId::Csnn => {
            let k = params.require_k(m)?;
            let g = graph::build_knn_graph(dm, k)?;
            let a = affinity::csnn_affinity(&g, k)?;
            Ok((a, Some(g)))
        }
        MethodId::Pg => {
            let a = affinity::pg_affinity(dm, params.require("gamma", m)?)?;
            Ok((a, None))
        }
        MethodId::Cpsc | MethodId::Cpsca | MethodId::Hybrid => {
            let eps = params.require("epsilon", m)?;
            let g = graph::build_epsilon_graph(dm, eps)?;
            let ncm = params.ncm_spec(m)?;
            let tau = params.tau_mode(seed)?;
            let a = match method {
                MethodId::Cpsc => affinity::cpsc_asymmetric(data, dm, &g, &ncm, &tau)?,
                MethodId::Cpsca => affinity::cpsca_symmetric(data, dm, &g, &ncm, &tau)?,
                MethodId::Hybrid => {
                    let sigma = params.sigma.unwrap_or_else(|| {
                        affinity::default_hybrid_sigma(dm, params.k_nn.unwrap_or(7))
                    });
                    affinity::hybrid_affinity(data, dm, &g, &ncm, &tau, sigma)?
                }
                _ => unreachable!(),
            };
            Ok((a, Some(g)))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsBlock {
    pub ari: f64,
    pub nmi: f64,
    pub ce: f64,
}

pub fn external_metrics(
    truth: Option<&[usize]>,
    predicted: &[usize],
) -> Result<Option<MetricsBlock>, CliError> {
    match truth {
        None => Ok(None),
        Some(t) => Ok(Some(MetricsBlock {
            ari: metrics::ari(t, predicted)?,
            nmi: metrics::nmi(t, predicted)?,
            ce: metrics::clustering_error(t, predicted)?,
        })),
    }
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<(), CliError> {
    let mut out = String::from("point_index,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| config_err(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(CoreError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn ensure_out_dir(out: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))
}
