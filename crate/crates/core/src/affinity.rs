//! Affinity matrix builders.
//!
//! Conformal variants:
//! * `cpsc_asymmetric` — entry (i, j) is the conformal p-value of point i
//!   against the neighborhood set of point j.
//! * `cpsca_symmetric` — the symmetrized mean of the two directed entries.
//! * `hybrid_affinity` — the symmetrized p-value plus a Gaussian kernel
//!   term, so graph connectivity survives even where neighborhoods are
//!   empty.
//!
//! Baselines: plain Gaussian, local-scale Gaussian, common-nearest-neighbor
//! weighted Gaussian, neighbor propagation, shared-nearest-neighbor counts,
//! rank-weighted shared neighbors, and the powered Gaussian.
//!
//! Every off-diagonal conformal entry equals a literal [`p_value`] call on
//! the same inputs, bit for bit; the internal engine only restructures the
//! computation so neighborhood tables are shared across pairs and across a
//! batch of KNN parameters.
//!
//! [`p_value`]: crate::conformal::p_value

use nalgebra::DMatrix;

use crate::conformal::{gaussian_kernel, NcmSpec, TauMode};
use crate::dataset::{Dataset, DistanceMatrix};
use crate::error::{Error, Result};
use crate::graph::{GraphKind, NeighborhoodGraph};

/// Dense nonnegative similarity matrix tagged with the formula that built it.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    values: DMatrix<f64>,
    builder: String,
    warning: Option<String>,
}

impl AffinityMatrix {
    fn new_checked(values: DMatrix<f64>, builder: String, warning: Option<String>) -> Result<Self> {
        for i in 0..values.nrows() {
            if values[(i, i)] != 0.0 {
                return Err(Error::Numerical(format!(
                    "{builder}: nonzero diagonal at {i}"
                )));
            }
        }
        if let Some((i, j)) = (0..values.nrows())
            .flat_map(|i| (0..values.ncols()).map(move |j| (i, j)))
            .find(|&(i, j)| !values[(i, j)].is_finite() || values[(i, j)] < 0.0)
        {
            return Err(Error::Numerical(format!(
                "{builder}: invalid entry at ({i}, {j}): {}",
                values[(i, j)]
            )));
        }
        Ok(AffinityMatrix {
            values,
            builder,
            warning,
        })
    }

    /// Wraps raw values under the standard validity checks (finite,
    /// nonnegative, zero diagonal); for pipeline stages that assemble
    /// affinities from already-built parts.
    pub(crate) fn from_values(values: DMatrix<f64>, builder: String) -> Result<Self> {
        Self::new_checked(values, builder, None)
    }

    /// Symmetrized copy: `(A + A^T) / 2` with zero diagonal.
    pub fn from_symmetrized(a: &AffinityMatrix) -> AffinityMatrix {
        AffinityMatrix {
            values: symmetrize(&a.values),
            builder: format!("sym({})", a.builder),
            warning: a.warning.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn builder(&self) -> &str {
        &self.builder
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.values[(i, j)] - self.values[(j, i)]).abs());
            }
        }
        worst
    }

    /// Dumps the dense matrix as CSV for debugging.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        let werr = |e: std::io::Error| Error::Io {
            path: "<affinity dump>".into(),
            source: e,
        };
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.n())
                .map(|j| format!("{}", self.values[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(",")).map_err(werr)?;
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(
            "sigma",
            format!("must be finite and > 0, got {sigma}"),
        ));
    }
    Ok(())
}

#[inline]
fn gaussian_entry(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

/// Plain Gaussian kernel: `A_ij = exp(-d_ij^2 / (2 sigma^2))`, zero diagonal.
pub fn gaussian_affinity(dm: &DistanceMatrix, sigma: f64) -> Result<AffinityMatrix> {
    check_sigma(sigma)?;
    let n = dm.n();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = gaussian_entry(dm.get(i, j), sigma);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    AffinityMatrix::new_checked(values, format!("gaussian(sigma={sigma})"), None)
}

/// Mean distance from each point to its `k_nn` nearest others.
fn local_scales(dm: &DistanceMatrix, k_nn: usize) -> Vec<f64> {
    let n = dm.n();
    let k = k_nn.min(n - 1).max(1);
    (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dm.get(i, j)).collect();
            d.sort_unstable_by(f64::total_cmp);
            d[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

/// Local-scale Gaussian: `A_ij = exp(-d_ij^2 / (sigma_i sigma_j))` with
/// `sigma_i` the mean distance to the `k_nn` nearest neighbors. Zero scales
/// (duplicated points) fall back to the smallest positive scale, or 1.
pub fn local_scale_affinity(dm: &DistanceMatrix, k_nn: usize) -> Result<AffinityMatrix> {
    if dm.n() < 2 {
        return Err(Error::invalid("n", "local scale needs at least 2 points"));
    }
    if k_nn == 0 {
        return Err(Error::invalid("k-nn", "must be >= 1"));
    }
    let mut sigma = local_scales(dm, k_nn);
    let fallback = sigma
        .iter()
        .copied()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let fallback = if fallback.is_finite() { fallback } else { 1.0 };
    for s in &mut sigma {
        if *s == 0.0 {
            *s = fallback;
        }
    }
    let n = dm.n();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dm.get(i, j);
            let v = (-(d * d) / (sigma[i] * sigma[j])).exp();
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    AffinityMatrix::new_checked(values, format!("local_scale(k_nn={k_nn})"), None)
}

/// Common-nearest-neighbor weighted Gaussian:
/// `A_kl = exp(-d_kl^2 / (2 sigma^2 (CNN_kl + 1)))`.
pub fn cnn_affinity(
    dm: &DistanceMatrix,
    sigma: f64,
    g: &NeighborhoodGraph,
) -> Result<AffinityMatrix> {
    check_sigma(sigma)?;
    if g.n() != dm.n() {
        return Err(Error::invalid(
            "graph",
            format!("graph over {} points, distances over {}", g.n(), dm.n()),
        ));
    }
    let n = dm.n();
    let sorted_adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut a = g.neighborhood(i).expect("index in range").to_vec();
            a.sort_unstable();
            a
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let cnn = sorted_intersection_count(&sorted_adj[i], &sorted_adj[j]);
            let d = dm.get(i, j);
            let v = (-(d * d) / (2.0 * sigma * sigma * (cnn as f64 + 1.0))).exp();
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    AffinityMatrix::new_checked(values, format!("cnn(sigma={sigma})"), None)
}

fn sorted_intersection_count(a: &[usize], b: &[usize]) -> usize {
    let (mut x, mut y, mut count) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                x += 1;
                y += 1;
            }
        }
    }
    count
}

/// Neighbor propagation: start from the Gaussian affinity and the relation
/// `b_ij = 1 iff d_ij < epsilon`; while some triple has `b_ij = b_jk = 1`
/// and `b_ik = 0`, set `b_ik = b_ki = 1` and `a_ik = a_ki = min(a_ij, a_jk)`.
/// Triples are scanned in lexicographic order until a full pass fires
/// nothing.
pub fn np_affinity(dm: &DistanceMatrix, sigma: f64, epsilon: f64) -> Result<AffinityMatrix> {
    check_sigma(sigma)?;
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::invalid("epsilon", "must be finite and >= 0"));
    }
    let n = dm.n();
    let base = gaussian_affinity(dm, sigma)?;
    let mut values = base.values.clone();
    let mut b = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dm.get(i, j) < epsilon {
                b[i * n + j] = true;
            }
        }
    }
    loop {
        let mut fired = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || !b[i * n + j] {
                    continue;
                }
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    if b[j * n + k] && !b[i * n + k] {
                        b[i * n + k] = true;
                        b[k * n + i] = true;
                        let v = values[(i, j)].min(values[(j, k)]);
                        values[(i, k)] = v;
                        values[(k, i)] = v;
                        fired = true;
                    }
                }
            }
        }
        if !fired {
            break;
        }
    }
    AffinityMatrix::new_checked(values, format!("np(sigma={sigma}, epsilon={epsilon})"), None)
}

fn require_knn<'g>(g: &'g NeighborhoodGraph, k_nn: usize, what: &str) -> Result<&'g GraphKind> {
    match g.kind() {
        GraphKind::Knn { k_nn: gk } if *gk == k_nn => Ok(g.kind()),
        GraphKind::Knn { k_nn: gk } => Err(Error::invalid(
            "graph",
            format!("{what} expects a kNN graph with k={k_nn}, got k={gk}"),
        )),
        GraphKind::Epsilon { .. } => Err(Error::invalid(
            "graph",
            format!("{what} expects a directed kNN graph, got an epsilon graph"),
        )),
    }
}

/// Shared-nearest-neighbor count affinity: `A_ij = |N_i ∩ N_j| / k_nn` over
/// the directed kNN graph.
pub fn snn_affinity(g: &NeighborhoodGraph, k_nn: usize) -> Result<AffinityMatrix> {
    require_knn(g, k_nn, "snn")?;
    let n = g.n();
    let sorted_adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut a = g.neighborhood(i).expect("index in range").to_vec();
            a.sort_unstable();
            a
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sorted_intersection_count(&sorted_adj[i], &sorted_adj[j]) as f64 / k_nn as f64;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    AffinityMatrix::new_checked(values, format!("snn(k_nn={k_nn})"), None)
}

/// Rank-weighted shared-nearest-neighbor affinity. A shared neighbor ranked
/// `r_i` in `N_i` and `r_j` in `N_j` (1-based, distance order) contributes
/// `(k - r_i + 1) * (k - r_j + 1)`; entries are normalized by the global
/// maximum weight. If no pair shares a neighbor the matrix is all zeros and
/// a warning is attached.
pub fn csnn_affinity(g: &NeighborhoodGraph, k_nn: usize) -> Result<AffinityMatrix> {
    require_knn(g, k_nn, "csnn")?;
    let n = g.n();
    // rank_of[i] maps neighbor id -> 1-based rank within N_i.
    let rank_of: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|i| {
            let mut pairs: Vec<(usize, usize)> = g
                .neighborhood(i)
                .expect("index in range")
                .iter()
                .enumerate()
                .map(|(r, &u)| (u, r + 1))
                .collect();
            pairs.sort_unstable();
            pairs
        })
        .collect();
    let k = k_nn as f64;
    let mut weights = DMatrix::zeros(n, n);
    let mut max_w = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&rank_of[i], &rank_of[j]);
            let (mut x, mut y) = (0, 0);
            let mut w = 0.0;
            while x < a.len() && y < b.len() {
                match a[x].0.cmp(&b[y].0) {
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                    std::cmp::Ordering::Equal => {
                        w += (k - a[x].1 as f64 + 1.0) * (k - b[y].1 as f64 + 1.0);
                        x += 1;
                        y += 1;
                    }
                }
            }
            weights[(i, j)] = w;
            weights[(j, i)] = w;
            max_w = max_w.max(w);
        }
    }
    let (values, warning) = if max_w > 0.0 {
        (weights.map(|w| w / max_w), None)
    } else {
        (
            weights,
            Some("csnn: no pair of points shares a neighbor; affinity is all zeros".to_string()),
        )
    };
    AffinityMatrix::new_checked(values, format!("csnn(k_nn={k_nn})"), warning)
}

/// Powered Gaussian: `A_ij = exp(-d_ij^2 / beta)^gamma` with
/// `beta = max_i min_{j != i} d_ij`, zero diagonal. Degenerate `beta = 0`
/// (all points duplicated) falls back to 1.
pub fn pg_affinity(dm: &DistanceMatrix, gamma: f64) -> Result<AffinityMatrix> {
    if dm.n() < 2 {
        return Err(Error::invalid("n", "powered Gaussian needs at least 2 points"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be finite and > 0"));
    }
    let n = dm.n();
    let beta = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| dm.get(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max);
    let beta = if beta > 0.0 { beta } else { 1.0 };
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dm.get(i, j);
            let v = (-(d * d) / beta).exp().powf(gamma);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    AffinityMatrix::new_checked(values, format!("pg(gamma={gamma}, beta={beta})"), None)
}

/// Mean distance from each point to its `k_nn`-th nearest neighbor; the
/// default scale for the hybrid affinity's Gaussian term.
pub fn default_hybrid_sigma(dm: &DistanceMatrix, k_nn: usize) -> f64 {
    let n = dm.n();
    if n < 2 {
        return 1.0;
    }
    let k = k_nn.clamp(1, n - 1);
    let mut total = 0.0;
    for i in 0..n {
        let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dm.get(i, j)).collect();
        d.sort_unstable_by(f64::total_cmp);
        total += d[k - 1];
    }
    let sigma = total / n as f64;
    if sigma > 0.0 {
        sigma
    } else {
        1.0
    }
}

// --- conformal p-value engine -----------------------------------------------

/// Per-member table for one neighborhood: the `head_len` smallest distances
/// to the other members (ascending) and their left-fold prefix sums.
struct MemberTable {
    head: Vec<f64>,
    prefix: Vec<f64>,
    truncated: bool,
}

fn build_member_tables(
    dm: &DistanceMatrix,
    members: &[usize],
    head_len: usize,
) -> Vec<MemberTable> {
    members
        .iter()
        .enumerate()
        .map(|(t, &u)| {
            let row = dm.row(u);
            let mut d: Vec<f64> = members
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != t)
                .map(|(_, &v)| row[v])
                .collect();
            let truncated = d.len() > head_len;
            if truncated {
                d.select_nth_unstable_by(head_len - 1, f64::total_cmp);
                d.truncate(head_len);
            }
            d.sort_unstable_by(f64::total_cmp);
            let mut prefix = Vec::with_capacity(d.len() + 1);
            let mut s = 0.0;
            prefix.push(s);
            for &v in &d {
                s += v;
                prefix.push(s);
            }
            MemberTable {
                head: d,
                prefix,
                truncated,
            }
        })
        .collect()
}

#[inline]
fn bounds_leq_lt(sorted: &[f64], x: f64) -> (usize, usize) {
    let lb = sorted.partition_point(|&v| v < x);
    let ub = sorted.partition_point(|&v| v <= x);
    (lb, ub)
}

/// Asymmetric conformal p-value matrices for a batch of KNN non-conformity
/// parameters (strictly ascending), sharing neighborhood tables across the
/// batch. `taus[t]` supplies the tie-smoothing draws for `ncm_ks[t]`.
///
/// Entry (i, j) equals `p_value(z_i, Nbd(z_j) \ {z_i}, knn(k), tau_for(i, j))`
/// exactly, or 0 when that set is empty.
pub(crate) fn cpsc_knn_batch(
    dm: &DistanceMatrix,
    g: &NeighborhoodGraph,
    ncm_ks: &[usize],
    taus: &[TauMode],
) -> Result<Vec<DMatrix<f64>>> {
    if ncm_ks.is_empty() || ncm_ks.len() != taus.len() {
        return Err(Error::invalid("ncm-ks", "empty batch or tau count mismatch"));
    }
    if ncm_ks.windows(2).any(|w| w[0] >= w[1]) || ncm_ks[0] == 0 {
        return Err(Error::invalid("ncm-ks", "must be strictly ascending and >= 1"));
    }
    if g.n() != dm.n() {
        return Err(Error::invalid("graph", "graph and distance size mismatch"));
    }
    let n = dm.n();
    let max_k = *ncm_ks.last().unwrap();
    let mut out = vec![DMatrix::<f64>::zeros(n, n); ncm_ks.len()];
    let mut pos = vec![usize::MAX; n];

    for j in 0..n {
        let members = g.neighborhood(j)?;
        let m = members.len();
        if m == 0 {
            continue;
        }
        for (t, &u) in members.iter().enumerate() {
            pos[u] = t;
        }
        let head_len = max_k.min(m - 1);
        let tables = build_member_tables(dm, members, head_len);

        // Scores of each member against the other members alone, per k.
        let (c1_alpha, c1_sorted): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if m >= 2 {
            let alpha: Vec<Vec<f64>> = ncm_ks
                .iter()
                .map(|&k| {
                    tables
                        .iter()
                        .map(|tb| tb.prefix[k.min(m - 1).min(tb.head.len())])
                        .collect()
                })
                .collect();
            let sorted = alpha
                .iter()
                .map(|a| {
                    let mut s = a.clone();
                    s.sort_unstable_by(f64::total_cmp);
                    s
                })
                .collect();
            (alpha, sorted)
        } else {
            (Vec::new(), Vec::new())
        };

        let mut dstar = vec![0.0f64; m];
        for i in 0..n {
            if i == j {
                continue;
            }
            if pos[i] != usize::MAX {
                // i is a member: the provisional set is the neighborhood itself.
                if m < 2 {
                    continue; // Nbd(j) \ {i} is empty
                }
                let t = pos[i];
                for (ki, _) in ncm_ks.iter().enumerate() {
                    let a_n = c1_alpha[ki][t];
                    let (lb, ub) = bounds_leq_lt(&c1_sorted[ki], a_n);
                    let greater = m - ub;
                    let equal = ub - lb; // includes i itself
                    let tau = taus[ki].tau_for(i, j);
                    out[ki][(i, j)] = (greater as f64 + equal as f64 * tau) / m as f64;
                }
                continue;
            }

            // i joins the neighborhood provisionally.
            let row = dm.row(i);
            for (t, &u) in members.iter().enumerate() {
                dstar[t] = row[u];
            }
            if m == 1 {
                // Both scores fold to 0.0 + d; always tied.
                for (ki, _) in ncm_ks.iter().enumerate() {
                    out[ki][(i, j)] = taus[ki].tau_for(i, j);
                }
                continue;
            }

            let own_keep = max_k.min(m);
            let mut own = dstar.clone();
            if own.len() > own_keep {
                own.select_nth_unstable_by(own_keep - 1, f64::total_cmp);
                own.truncate(own_keep);
            }
            own.sort_unstable_by(f64::total_cmp);
            let mut own_prefix = Vec::with_capacity(own.len() + 1);
            let mut s = 0.0;
            own_prefix.push(s);
            for &v in &own {
                s += v;
                own_prefix.push(s);
            }

            // Insertion position of d* in each member's head; members whose
            // k smallest distances are unaffected read straight from prefix.
            let mut by_p: Vec<(usize, usize)> = (0..m)
                .map(|t| {
                    let tb = &tables[t];
                    let d = dstar[t];
                    let p = if tb.truncated && d >= *tb.head.last().unwrap() {
                        tb.head.len()
                    } else {
                        tb.head.partition_point(|&v| v < d)
                    };
                    (p, t)
                })
                .collect();
            by_p.sort_unstable();

            // (member, its insertion position, running fold, values consumed)
            struct Active {
                t: usize,
                p: usize,
                cur: f64,
                consumed: usize,
            }
            let mut active: Vec<Active> = Vec::new();
            let mut next = 0usize;
            for (ki, &k) in ncm_ks.iter().enumerate() {
                while next < m && by_p[next].0 < k {
                    let (p, t) = by_p[next];
                    active.push(Active {
                        t,
                        p,
                        cur: tables[t].prefix[p] + dstar[t],
                        consumed: 0,
                    });
                    next += 1;
                }
                let c = k.min(m);
                for a in &mut active {
                    let target = c - a.p - 1;
                    while a.consumed < target {
                        a.cur += tables[a.t].head[a.p + a.consumed];
                        a.consumed += 1;
                    }
                }
                let a_n = own_prefix[c];
                let (lb, ub) = bounds_leq_lt(&c1_sorted[ki], a_n);
                let mut greater = (m - ub) as i64;
                let mut equal = (ub - lb) as i64 + 1; // provisional point itself
                for a in &active {
                    let old = c1_alpha[ki][a.t];
                    if old > a_n {
                        greater -= 1;
                    } else if old == a_n {
                        equal -= 1;
                    }
                    if a.cur > a_n {
                        greater += 1;
                    } else if a.cur == a_n {
                        equal += 1;
                    }
                }
                let tau = taus[ki].tau_for(i, j);
                out[ki][(i, j)] = (greater as f64 + equal as f64 * tau) / (m + 1) as f64;
            }
        }
        for &u in members {
            pos[u] = usize::MAX;
        }
    }
    Ok(out)
}

/// Asymmetric conformal p-value matrix with the KDE non-conformity measure.
fn cpsc_kde(
    dm: &DistanceMatrix,
    dim: usize,
    g: &NeighborhoodGraph,
    bandwidth: f64,
    tau: &TauMode,
) -> Result<DMatrix<f64>> {
    NcmSpec::Kde { bandwidth }.validate()?;
    let n = dm.n();
    let scale = |len: usize| len as f64 * bandwidth.powi(dim as i32);
    let mut out = DMatrix::<f64>::zeros(n, n);
    let mut pos = vec![usize::MAX; n];

    for j in 0..n {
        let members = g.neighborhood(j)?;
        let m = members.len();
        if m == 0 {
            continue;
        }
        for (t, &u) in members.iter().enumerate() {
            pos[u] = t;
        }
        // Full sorted base distances per member, their kernel terms, and
        // left-fold prefixes of those terms.
        let mut base: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut kterms: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut kprefix: Vec<Vec<f64>> = Vec::with_capacity(m);
        for (t, &u) in members.iter().enumerate() {
            let row = dm.row(u);
            let mut d: Vec<f64> = members
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != t)
                .map(|(_, &v)| row[v])
                .collect();
            d.sort_unstable_by(f64::total_cmp);
            let terms: Vec<f64> = d.iter().map(|&v| gaussian_kernel(v / bandwidth)).collect();
            let mut kp = Vec::with_capacity(d.len() + 1);
            let mut s = 0.0;
            kp.push(s);
            for &kv in &terms {
                s += kv;
                kp.push(s);
            }
            base.push(d);
            kterms.push(terms);
            kprefix.push(kp);
        }
        let (c1_alpha, c1_sorted): (Vec<f64>, Vec<f64>) = if m >= 2 {
            let alpha: Vec<f64> = (0..m)
                .map(|t| -(kprefix[t][m - 1] / scale(m - 1)))
                .collect();
            let mut sorted = alpha.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            (alpha, sorted)
        } else {
            (Vec::new(), Vec::new())
        };

        for i in 0..n {
            if i == j {
                continue;
            }
            let tau_ij = tau.tau_for(i, j);
            if pos[i] != usize::MAX {
                if m < 2 {
                    continue;
                }
                let a_n = c1_alpha[pos[i]];
                let (lb, ub) = bounds_leq_lt(&c1_sorted, a_n);
                out[(i, j)] = ((m - ub) as f64 + (ub - lb) as f64 * tau_ij) / m as f64;
                continue;
            }
            let row = dm.row(i);
            let mut own: Vec<f64> = members.iter().map(|&u| row[u]).collect();
            own.sort_unstable_by(f64::total_cmp);
            let mut s = 0.0;
            for &v in &own {
                s += gaussian_kernel(v / bandwidth);
            }
            let a_n = -(s / scale(m));
            let mut greater = 0i64;
            let mut equal = 1i64;
            for (t, &u) in members.iter().enumerate() {
                let d = row[u];
                let p = base[t].partition_point(|&v| v < d);
                let mut ks = kprefix[t][p] + gaussian_kernel(d / bandwidth);
                for &kv in &kterms[t][p..] {
                    ks += kv;
                }
                let alpha = -(ks / scale(m));
                if alpha > a_n {
                    greater += 1;
                } else if alpha == a_n {
                    equal += 1;
                }
            }
            out[(i, j)] = (greater as f64 + equal as f64 * tau_ij) / (m + 1) as f64;
        }
        for &u in members {
            pos[u] = usize::MAX;
        }
    }
    Ok(out)
}

fn cpsc_values(
    data: &Dataset,
    dm: &DistanceMatrix,
    g: &NeighborhoodGraph,
    ncm: &NcmSpec,
    tau: &TauMode,
) -> Result<DMatrix<f64>> {
    if data.n() != dm.n() {
        return Err(Error::invalid("data", "dataset and distance size mismatch"));
    }
    ncm.validate()?;
    tau.validate()?;
    match *ncm {
        NcmSpec::Knn { k_nn } => {
            Ok(cpsc_knn_batch(dm, g, &[k_nn], std::slice::from_ref(tau))?.remove(0))
        }
        NcmSpec::Kde { bandwidth } => cpsc_kde(dm, data.dim(), g, bandwidth, tau),
    }
}

/// Asymmetric conformal affinity: `A_ij = P(z_i, Nbd(z_j) \ {z_i})`, or 0
/// when that neighborhood set is empty. The only builder whose output is
/// not symmetric.
pub fn cpsc_asymmetric(
    data: &Dataset,
    dm: &DistanceMatrix,
    g: &NeighborhoodGraph,
    ncm: &NcmSpec,
    tau: &TauMode,
) -> Result<AffinityMatrix> {
    let values = cpsc_values(data, dm, g, ncm, tau)?;
    AffinityMatrix::new_checked(values, format!("cpsc({ncm}, {tau})"), None)
}

pub(crate) fn symmetrize(values: &DMatrix<f64>) -> DMatrix<f64> {
    let n = values.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[(i, j)] = (values[(i, j)] + values[(j, i)]) / 2.0;
            }
        }
    }
    out
}

/// Symmetrized conformal affinity: the mean of the two directed p-values.
pub fn cpsca_symmetric(
    data: &Dataset,
    dm: &DistanceMatrix,
    g: &NeighborhoodGraph,
    ncm: &NcmSpec,
    tau: &TauMode,
) -> Result<AffinityMatrix> {
    let values = symmetrize(&cpsc_values(data, dm, g, ncm, tau)?);
    AffinityMatrix::new_checked(values, format!("cpsca({ncm}, {tau})"), None)
}

/// Hybrid affinity: symmetrized conformal p-value plus a Gaussian kernel
/// term, entries in [0, 2].
pub fn hybrid_affinity(
    data: &Dataset,
    dm: &DistanceMatrix,
    g: &NeighborhoodGraph,
    ncm: &NcmSpec,
    tau: &TauMode,
    sigma: f64,
) -> Result<AffinityMatrix> {
    check_sigma(sigma)?;
    let mut values = symmetrize(&cpsc_values(data, dm, g, ncm, tau)?);
    let n = values.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values[(i, j)] += gaussian_entry(dm.get(i, j), sigma);
            }
        }
    }
    AffinityMatrix::new_checked(values, format!("hybrid({ncm}, {tau}, sigma={sigma})"), None)
}
