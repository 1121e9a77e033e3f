//! Neighborhood graphs over point indices: symmetric epsilon-graphs and
//! directed k-nearest-neighbor graphs.

use std::io::Write;

use crate::dataset::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    /// Edge iff distance strictly below `epsilon`; symmetric.
    Epsilon { epsilon: f64 },
    /// Directed edges to the `k_nn` nearest other points.
    Knn { k_nn: usize },
}

#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    kind: GraphKind,
    adjacency: Vec<Vec<usize>>,
}

/// Builds the epsilon-graph: `j` is a neighbor of `i` iff `d(i, j) < epsilon`.
/// No self-loops; adjacency lists are index-ordered.
pub fn build_epsilon_graph(dm: &DistanceMatrix, epsilon: f64) -> Result<NeighborhoodGraph> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::invalid(
            "epsilon",
            format!("must be finite and >= 0, got {epsilon}"),
        ));
    }
    let n = dm.n();
    let adjacency = (0..n)
        .map(|i| {
            let row = dm.row(i);
            (0..n)
                .filter(|&j| j != i && row[j] < epsilon)
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(NeighborhoodGraph {
        kind: GraphKind::Epsilon { epsilon },
        adjacency,
    })
}

/// Builds the directed kNN graph: each node points to its `min(k_nn, n-1)`
/// nearest other points, ordered by increasing distance, ties broken by
/// lower index.
pub fn build_knn_graph(dm: &DistanceMatrix, k_nn: usize) -> Result<NeighborhoodGraph> {
    if k_nn == 0 {
        return Err(Error::invalid("k-nn", "must be >= 1"));
    }
    let n = dm.n();
    let k = k_nn.min(n.saturating_sub(1));
    let adjacency = (0..n)
        .map(|i| {
            let row = dm.row(i);
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            order.truncate(k);
            order
        })
        .collect();
    Ok(NeighborhoodGraph {
        kind: GraphKind::Knn { k_nn },
        adjacency,
    })
}

impl NeighborhoodGraph {
    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn kind(&self) -> &GraphKind {
        &self.kind
    }

    /// The neighborhood set `N(u)`, in the graph's canonical order.
    pub fn neighborhood(&self, u: usize) -> Result<&[usize]> {
        self.adjacency
            .get(u)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid("node", format!("index {u} out of range")))
    }

    /// `|N(i) ∩ N(j)|`, excluding `i` and `j` themselves.
    pub fn common_neighbors(&self, i: usize, j: usize) -> Result<usize> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(Error::invalid("node", "index out of range"));
        }
        if i == j {
            return Err(Error::invalid("node", "i and j must differ"));
        }
        let mut a: Vec<usize> = self.adjacency[i]
            .iter()
            .copied()
            .filter(|&v| v != i && v != j)
            .collect();
        let mut b: Vec<usize> = self.adjacency[j]
            .iter()
            .copied()
            .filter(|&v| v != i && v != j)
            .collect();
        a.sort_unstable();
        b.sort_unstable();
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
        Ok(count)
    }

    /// Total directed adjacency entries (each undirected edge counts twice).
    pub fn degree_sum(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Dumps the adjacency as `i,j,dist` lines for debugging.
    pub fn write_edge_list(&self, dm: &DistanceMatrix, mut w: impl Write) -> Result<()> {
        let werr = |e: std::io::Error| Error::Io {
            path: "<edge list>".into(),
            source: e,
        };
        writeln!(w, "i,j,dist").map_err(werr)?;
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs {
                writeln!(w, "{i},{j},{}", dm.get(i, j)).map_err(werr)?;
            }
        }
        Ok(())
    }
}
