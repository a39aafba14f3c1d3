//! Erdős–Rényi baseline graphs.

use nalgebra::DMatrix;
use rand::Rng;

use super::{GraphError, WeightedDigraph};

/// Draws a directed G(n, p) graph: every ordered pair `(i, j)` with `i ≠ j`
/// becomes an edge of weight 1 independently with probability `p`.
///
/// The generator is consumed in a fixed row-major order (one draw per
/// ordered pair, whatever `p` is), so the graph is reproducible from the
/// seed alone.
pub fn erdos_renyi<R: Rng>(n: usize, p: f64, rng: &mut R) -> Result<WeightedDigraph, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidArgument(format!(
            "need at least 2 nodes, got {n}"
        )));
    }
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(GraphError::InvalidArgument(format!(
            "edge probability must be in [0, 1], got {p}"
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if rng.random::<f64>() < p {
                m[(i, j)] = 1.0;
            }
        }
    }
    WeightedDigraph::new(m, true)
}
