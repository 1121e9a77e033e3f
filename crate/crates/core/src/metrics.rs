//! External clustering metrics (ARI, NMI, clustering error) and the
//! internal silhouette index.

use crate::dataset::DistanceMatrix;
use crate::error::{Error, Result};

/// Contingency table between two labelings of the same points.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub total: usize,
}

fn remap_dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = Vec::new();
    let mapped = labels
        .iter()
        .map(|&l| match seen.iter().position(|&s| s == l) {
            Some(i) => i,
            None => {
                seen.push(l);
                seen.len() - 1
            }
        })
        .collect();
    (mapped, seen.len())
}

impl ContingencyTable {
    pub fn new(labels_a: &[usize], labels_b: &[usize]) -> Result<Self> {
        if labels_a.len() != labels_b.len() {
            return Err(Error::invalid(
                "labels",
                format!(
                    "length mismatch: {} vs {}",
                    labels_a.len(),
                    labels_b.len()
                ),
            ));
        }
        if labels_a.is_empty() {
            return Err(Error::invalid("labels", "empty label vectors"));
        }
        let (a, r) = remap_dense(labels_a);
        let (b, s) = remap_dense(labels_b);
        let mut counts = vec![vec![0usize; s]; r];
        for (&x, &y) in a.iter().zip(&b) {
            counts[x][y] += 1;
        }
        let row_sums: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
        let col_sums: Vec<usize> = (0..s).map(|j| counts.iter().map(|row| row[j]).sum()).collect();
        Ok(ContingencyTable {
            counts,
            row_sums,
            col_sums,
            total: labels_a.len(),
        })
    }
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// True when both label vectors induce the same partition of the indices.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let (da, _) = remap_dense(a);
    let (db, _) = remap_dense(b);
    da == db
}

/// Adjusted Rand Index in [-1, 1].
///
/// When the adjustment denominator vanishes the value is 1.0 for identical
/// partitions and 0.0 otherwise.
pub fn ari(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    let ct = ContingencyTable::new(labels_true, labels_pred)?;
    if ct.total < 2 {
        return Err(Error::invalid("labels", "ARI needs at least 2 points"));
    }
    let index: f64 = ct
        .counts
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| comb2(c))
        .sum();
    let sum_rows: f64 = ct.row_sums.iter().map(|&t| comb2(t)).sum();
    let sum_cols: f64 = ct.col_sums.iter().map(|&l| comb2(l)).sum();
    let pairs = comb2(ct.total);
    let expected = sum_rows * sum_cols / pairs;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(if same_partition(labels_true, labels_pred) {
            1.0
        } else {
            0.0
        });
    }
    Ok((index - expected) / denom)
}

/// Normalized mutual information in [0, 1], natural log, normalized by the
/// geometric mean of the entropies.
///
/// If both partitions carry zero entropy (single clusters) the score is
/// 1.0; if exactly one does, 0.0.
pub fn nmi(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    let ct = ContingencyTable::new(labels_true, labels_pred)?;
    let n = ct.total as f64;
    let entropy = |sums: &[usize]| -> f64 {
        let mut h = 0.0;
        for &c in sums {
            if c > 0 {
                let p = c as f64 / n;
                h -= p * p.ln();
            }
        }
        h
    };
    let h_true = entropy(&ct.row_sums);
    let h_pred = entropy(&ct.col_sums);
    if h_true == 0.0 && h_pred == 0.0 {
        return Ok(1.0);
    }
    if h_true == 0.0 || h_pred == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in ct.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += (c / n) * ((n * c) / (ct.row_sums[i] as f64 * ct.col_sums[j] as f64)).ln();
            }
        }
    }
    Ok(mi / (h_true * h_pred).sqrt())
}

/// Minimal-cost perfect matching on a square cost matrix, O(c^3) shortest
/// augmenting paths. Returns the column assigned to each row.
pub(crate) fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Clustering error in [0, 1]: the misclassification rate under the best
/// matching of predicted cluster ids to true ids (confusion matrix padded
/// square, optimal assignment).
pub fn clustering_error(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    let ct = ContingencyTable::new(labels_true, labels_pred)?;
    let c = ct.counts.len().max(ct.counts[0].len());
    let mut cost = vec![vec![0i64; c]; c];
    for (i, row) in ct.counts.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cost[i][j] = -(v as i64);
        }
    }
    let assign = min_cost_assignment(&cost);
    let matched: i64 = assign.iter().enumerate().map(|(i, &j)| -cost[i][j]).sum();
    Ok(1.0 - matched as f64 / ct.total as f64)
}

/// Mean silhouette score over all points. Singleton clusters contribute 0.
pub fn silhouette(dm: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    let n = dm.n();
    if labels.len() != n {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {} points", labels.len(), n),
        ));
    }
    if n < 3 {
        return Err(Error::invalid("labels", "silhouette needs n >= 3"));
    }
    let k = labels.iter().copied().max().unwrap() + 1;
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        clusters[l].push(i);
    }
    let non_empty = clusters.iter().filter(|c| !c.is_empty()).count();
    if non_empty < 2 {
        return Err(Error::invalid(
            "labels",
            "silhouette needs at least 2 non-empty clusters",
        ));
    }

    let mut total = 0.0;
    for (i, &own) in labels.iter().enumerate() {
        if clusters[own].len() == 1 {
            continue; // s(i) = 0 for singletons
        }
        let row = dm.row(i);
        let a: f64 = clusters[own]
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| row[j])
            .sum::<f64>()
            / (clusters[own].len() - 1) as f64;
        let mut b = f64::INFINITY;
        for (c, members) in clusters.iter().enumerate() {
            if c == own || members.is_empty() {
                continue;
            }
            let mean = members.iter().map(|&j| row[j]).sum::<f64>() / members.len() as f64;
            b = b.min(mean);
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}
