//! Reservoir topologies: visibility graphs of time-series sections,
//! Erdős–Rényi baselines, spectral scaling and network metrics.

mod metrics;
mod random;
mod spectral;
mod visibility;

pub use metrics::{metrics, NetworkMetrics};
pub use random::erdos_renyi;
pub use spectral::{
    scale_to_spectral_radius, spectral_radius, spectral_radius_dense, spectral_radius_power,
};
pub use visibility::{sample_sections, sample_sections_random, visibility_graph, Section};

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::fmt::g17;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("value and time arrays have different lengths ({values} vs {times})")]
    LengthMismatch { values: usize, times: usize },
    #[error("times are not strictly increasing at index {index}")]
    NonMonotonicTimes { index: usize },
    #[error("section span {span} exceeds series length {available}")]
    SectionTooLong { span: usize, available: usize },
    #[error("eigenvalue iteration did not converge within {iters} iterations")]
    NoConvergence { iters: usize },
    #[error("graph has zero spectral radius and cannot be scaled")]
    ZeroSpectralRadius,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed graph data: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A dense weighted graph. Entry `(i, j)` is the weight of the edge
/// `i -> j`; zero means "no edge". Undirected graphs hold an exactly
/// symmetric matrix. Self-loops are forbidden (zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    weights: DMatrix<f64>,
    directed: bool,
}

impl WeightedDigraph {
    /// Validates the invariants (square, finite, zero diagonal, symmetric
    /// when undirected) and wraps the matrix.
    pub fn new(weights: DMatrix<f64>, directed: bool) -> Result<Self, GraphError> {
        if weights.nrows() != weights.ncols() {
            return Err(GraphError::InvalidArgument(format!(
                "weight matrix must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        let n = weights.nrows();
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(GraphError::InvalidArgument(
                "weights must be finite".into(),
            ));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(GraphError::InvalidArgument(format!(
                    "self-loop at node {i}"
                )));
            }
        }
        if !directed {
            for i in 0..n {
                for j in i + 1..n {
                    if weights[(i, j)] != weights[(j, i)] {
                        return Err(GraphError::InvalidArgument(format!(
                            "undirected graph must be symmetric, differs at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(Self { weights, directed })
    }

    pub fn zeros(n: usize, directed: bool) -> Self {
        Self {
            weights: DMatrix::zeros(n, n),
            directed,
        }
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, src: usize, dst: usize) -> f64 {
        self.weights[(src, dst)]
    }

    /// Presence of an edge in either direction.
    pub fn linked(&self, a: usize, b: usize) -> bool {
        self.weights[(a, b)] != 0.0 || self.weights[(b, a)] != 0.0
    }

    /// Number of nonzero off-diagonal entries (directed edge count; an
    /// undirected edge contributes two entries).
    pub fn entry_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    /// Edge count in the graph's own convention: ordered pairs for directed
    /// graphs, unordered pairs for undirected ones.
    pub fn edge_count(&self) -> usize {
        let entries = self.entry_count();
        if self.directed {
            entries
        } else {
            entries / 2
        }
    }

    /// Edge density. For a directed graph this is `E / (N(N−1))`; for an
    /// undirected one `2E / (N(N−1))`. Both reduce to the fraction of
    /// nonzero off-diagonal entries, so an Erdős–Rényi draw with edge
    /// probability `p` has expected density `p`.
    pub fn density(&self) -> f64 {
        let n = self.node_count();
        if n < 2 {
            return 0.0;
        }
        self.entry_count() as f64 / (n * (n - 1)) as f64
    }

    /// Adjacency lists of the undirected unweighted support (edge present
    /// if either direction is nonzero), sorted by neighbor index.
    pub fn undirected_support(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if self.linked(i, j) {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        adj
    }

    /// Returns a copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: &self.weights * factor,
            directed: self.directed,
        }
    }

    /// Writes the graph as an edge list (`src,dst,weight`) preceded by a
    /// `# n=<N> directed=<bool>` comment line. Undirected graphs store each
    /// edge once with `src < dst`. Weights carry 17 significant digits so
    /// the import is bit-exact.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), GraphError> {
        writeln!(w, "# n={} directed={}", self.node_count(), self.directed)?;
        writeln!(w, "src,dst,weight")?;
        let n = self.node_count();
        for i in 0..n {
            let j0 = if self.directed { 0 } else { i + 1 };
            for j in j0..n {
                let weight = self.weights[(i, j)];
                if weight != 0.0 {
                    writeln!(w, "{i},{j},{}", g17(weight))?;
                }
            }
        }
        Ok(())
    }

    /// Reads a graph written by [`WeightedDigraph::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut lines = r.lines();
        let meta = lines
            .next()
            .ok_or_else(|| GraphError::Parse("empty file".into()))??;
        let meta = meta.trim();
        let rest = meta
            .strip_prefix("# n=")
            .ok_or_else(|| GraphError::Parse(format!("expected '# n=...' line, got '{meta}'")))?;
        let (n_str, dir_str) = rest
            .split_once(" directed=")
            .ok_or_else(|| GraphError::Parse(format!("missing 'directed=' in '{meta}'")))?;
        let n: usize = n_str
            .trim()
            .parse()
            .map_err(|e| GraphError::Parse(format!("bad node count: {e}")))?;
        let directed: bool = dir_str
            .trim()
            .parse()
            .map_err(|e| GraphError::Parse(format!("bad directed flag: {e}")))?;

        let header = lines
            .next()
            .ok_or_else(|| GraphError::Parse("missing column header".into()))??;
        if header.trim() != "src,dst,weight" {
            return Err(GraphError::Parse(format!(
                "expected header 'src,dst,weight', got '{header}'"
            )));
        }

        let mut m = DMatrix::zeros(n, n);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(GraphError::Parse(format!(
                    "row {row}: expected 3 fields, got {}",
                    fields.len()
                )));
            }
            let src: usize = fields[0]
                .trim()
                .parse()
                .map_err(|e| GraphError::Parse(format!("row {row}: bad src: {e}")))?;
            let dst: usize = fields[1]
                .trim()
                .parse()
                .map_err(|e| GraphError::Parse(format!("row {row}: bad dst: {e}")))?;
            let weight: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|e| GraphError::Parse(format!("row {row}: bad weight: {e}")))?;
            if src >= n || dst >= n {
                return Err(GraphError::Parse(format!(
                    "row {row}: node index out of range (n={n})"
                )));
            }
            m[(src, dst)] = weight;
            if !directed {
                m[(dst, src)] = weight;
            }
        }
        Self::new(m, directed)
    }
}
