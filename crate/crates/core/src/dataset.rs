//! Dataset ingestion, feature normalization, and pairwise distances.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A set of `n` points in `d` dimensions with optional ground-truth labels.
///
/// Labels are densified to `0..c-1` in order of first appearance, so the
/// metrics modules can index by them directly.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        points: Vec<Vec<f64>>,
        labels: Option<Vec<usize>>,
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::Data("dataset has no feature columns".into()));
        }
        for (i, row) in points.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Data(format!(
                    "row {} has {} features, expected {}",
                    i,
                    row.len(),
                    d
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite feature value at row {i}, column {j}"
                )));
            }
        }
        if let Some(ls) = &labels {
            if ls.len() != points.len() {
                return Err(Error::Data(format!(
                    "{} labels for {} rows",
                    ls.len(),
                    points.len()
                )));
            }
        }
        if let Some(ns) = &names {
            if ns.len() != d {
                return Err(Error::Data(format!(
                    "{} feature names for {} columns",
                    ns.len(),
                    d
                )));
            }
        }
        Ok(Dataset {
            points,
            labels,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Number of distinct ground-truth clusters, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|ls| ls.iter().copied().max().map_or(0, |m| m + 1))
    }
}

/// Selects which CSV column carries ground-truth labels.
#[derive(Debug, Clone)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

fn is_numeric(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Loads a comma-separated file.
///
/// A single header row is auto-detected: the first row is a header iff any
/// of its cells does not parse as a number. The label column, when
/// requested, is stripped from the features and its values mapped to dense
/// integer ids in order of first appearance.
pub fn load_csv(path: &Path, label: Option<&LabelColumn>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let rows: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
        .collect();
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: file is empty", path.display())));
    }

    let width = rows[0].1.len();
    for (line, cells) in &rows {
        if cells.len() != width {
            return Err(Error::Data(format!(
                "{}: row {} has {} columns, expected {}",
                path.display(),
                line,
                cells.len(),
                width
            )));
        }
    }

    let has_header = rows[0].1.iter().any(|c| !is_numeric(c));
    let header: Option<Vec<String>> = has_header
        .then(|| rows[0].1.iter().map(|s| s.to_string()).collect());
    let data_rows = &rows[if has_header { 1 } else { 0 }..];
    if data_rows.is_empty() {
        return Err(Error::Data(format!(
            "{}: no data rows below the header",
            path.display()
        )));
    }

    let label_idx = match label {
        None => None,
        Some(LabelColumn::Index(i)) => {
            if *i >= width {
                return Err(Error::invalid(
                    "label-column",
                    format!("index {i} out of range for {width} columns"),
                ));
            }
            Some(*i)
        }
        Some(LabelColumn::Name(name)) => match &header {
            None => {
                return Err(Error::invalid(
                    "label-column",
                    format!("column `{name}` requested but the file has no header row"),
                ))
            }
            Some(h) => match h.iter().position(|c| c == name) {
                Some(i) => Some(i),
                None => {
                    return Err(Error::invalid(
                        "label-column",
                        format!("no column named `{name}` in header"),
                    ))
                }
            },
        },
    };

    let mut points = Vec::with_capacity(data_rows.len());
    let mut raw_labels: Vec<String> = Vec::new();
    for (line, cells) in data_rows {
        let mut row = Vec::with_capacity(width - label_idx.map_or(0, |_| 1));
        for (c, cell) in cells.iter().enumerate() {
            if Some(c) == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    return Err(Error::Parse {
                        row: *line,
                        column: c + 1,
                        message: format!("`{cell}` is not a number"),
                    })
                }
            }
        }
        points.push(row);
    }

    let labels = label_idx.map(|_| densify(&raw_labels));
    let names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, c)| c)
            .collect()
    });
    Dataset::new(points, labels, names)
}

/// Maps raw label strings to 0..c-1 by first appearance.
fn densify(raw: &[String]) -> Vec<usize> {
    let mut seen: Vec<&str> = Vec::new();
    raw.iter()
        .map(|s| match seen.iter().position(|t| t == s) {
            Some(i) => i,
            None => {
                seen.push(s);
                seen.len() - 1
            }
        })
        .collect()
}

/// Writes a dataset back out as CSV (header row, label column last when
/// present). Floats are printed in shortest round-trip form.
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let names: Vec<String> = match ds.names() {
        Some(ns) => ns.to_vec(),
        None => (0..ds.dim()).map(|i| format!("x{i}")).collect(),
    };
    out.push_str(&names.join(","));
    if ds.labels().is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, row) in ds.points().iter().enumerate() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        if let Some(ls) = ds.labels() {
            let _ = write!(out, ",{}", ls[i]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Rescales every feature column to [0, 1]. Constant columns map to all
/// zeros. Labels pass through unchanged.
pub fn normalize_minmax(ds: &Dataset) -> Dataset {
    let (n, d) = (ds.n(), ds.dim());
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in ds.points() {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let mut points = vec![vec![0.0; d]; n];
    for (i, row) in ds.points().iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let range = hi[j] - lo[j];
            points[i][j] = if range > 0.0 { (v - lo[j]) / range } else { 0.0 };
        }
    }
    Dataset {
        points,
        labels: ds.labels.clone(),
        names: ds.names.clone(),
    }
}

/// Standardizes every feature column to zero mean and unit variance.
/// Zero-variance columns map to all zeros.
pub fn normalize_zscore(ds: &Dataset) -> Dataset {
    let (n, d) = (ds.n(), ds.dim());
    let mut mean = vec![0.0; d];
    for row in ds.points() {
        for (j, &v) in row.iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for row in ds.points() {
        for (j, &v) in row.iter().enumerate() {
            var[j] += (v - mean[j]) * (v - mean[j]);
        }
    }
    let mut points = vec![vec![0.0; d]; n];
    for (i, row) in ds.points().iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let sd = (var[j] / n as f64).sqrt();
            points[i][j] = if sd > 0.0 { (v - mean[j]) / sd } else { 0.0 };
        }
    }
    Dataset {
        points,
        labels: ds.labels.clone(),
        names: ds.names.clone(),
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s.sqrt()
}

/// Symmetric matrix of pairwise Euclidean distances, stored dense.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>, // row-major n*n
    max_dist: f64,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Row `i` as a contiguous slice of length `n`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Largest off-diagonal distance; 0 when `n == 1`.
    pub fn max_dist(&self) -> f64 {
        self.max_dist
    }
}

/// Computes all pairwise Euclidean distances. Each unordered pair is
/// evaluated once and mirrored, so the matrix is exactly symmetric.
pub fn pairwise_distances(ds: &Dataset) -> DistanceMatrix {
    let n = ds.n();
    let mut data = vec![0.0; n * n];
    let mut max_dist = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(ds.point(i), ds.point(j));
            data[i * n + j] = d;
            data[j * n + i] = d;
            max_dist = max_dist.max(d);
        }
    }
    DistanceMatrix { n, data, max_dist }
}
