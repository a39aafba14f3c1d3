//! Network metrics: spectral radius, density, degrees, clustering and
//! betweenness centrality.

use serde::{Deserialize, Serialize};

use super::{spectral_radius, WeightedDigraph};
use crate::fmt::g12;

/// The six per-graph metrics recorded for every reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    /// Spectral radius (largest eigenvalue modulus).
    pub nu: f64,
    /// Edge density; matches the generation probability of an Erdős–Rényi
    /// draw in expectation.
    pub rho: f64,
    /// Average in-degree (mean nonzero count per matrix column).
    pub k_in: f64,
    /// Average out-degree (mean nonzero count per matrix row).
    pub k_out: f64,
    /// Global clustering coefficient on the undirected support.
    pub clustering: f64,
    /// Average betweenness centrality on the undirected unweighted support
    /// (unordered endpoint pairs, endpoints excluded, no normalization
    /// beyond the 1/N average).
    pub betweenness: f64,
}

impl NetworkMetrics {
    /// JSON rendering with 12 significant digits per metric, in a fixed
    /// key order.
    pub fn to_json_12(&self) -> String {
        format!(
            "{{\"nu\": {}, \"rho\": {}, \"k_in\": {}, \"k_out\": {}, \"clustering\": {}, \"betweenness\": {}}}",
            g12(self.nu),
            g12(self.rho),
            g12(self.k_in),
            g12(self.k_out),
            g12(self.clustering),
            g12(self.betweenness),
        )
    }
}

/// Computes all six metrics of a graph.
///
/// Clustering and betweenness are evaluated on the undirected unweighted
/// support (an edge counts if either direction is nonzero), so they depend
/// only on the topology, not on the weights.
pub fn metrics(g: &WeightedDigraph) -> NetworkMetrics {
    let nu = spectral_radius(g).unwrap_or_else(|e| {
        log::error!("spectral radius did not converge on any route: {e}");
        f64::NAN
    });
    let n = g.node_count();
    let w = g.weights();

    let mut k_in_total = 0usize;
    let mut k_out_total = 0usize;
    for i in 0..n {
        k_out_total += w.row(i).iter().filter(|v| **v != 0.0).count();
        k_in_total += w.column(i).iter().filter(|v| **v != 0.0).count();
    }
    let k_in = k_in_total as f64 / n.max(1) as f64;
    let k_out = k_out_total as f64 / n.max(1) as f64;

    let adj = g.undirected_support();
    NetworkMetrics {
        nu,
        rho: g.density(),
        k_in,
        k_out,
        clustering: global_clustering(g, &adj),
        betweenness: mean_betweenness(&adj),
    }
}

/// Mean over nodes of `2T(v) / (κ(v)(κ(v)−1))` with `T(v)` the triangle
/// count through `v`; nodes of degree < 2 contribute 0.
fn global_clustering(g: &WeightedDigraph, adj: &[Vec<usize>]) -> f64 {
    let n = adj.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for nbrs in adj {
        let deg = nbrs.len();
        if deg < 2 {
            continue;
        }
        let mut triangles = 0usize;
        for (a, &u) in nbrs.iter().enumerate() {
            for &v in &nbrs[a + 1..] {
                if g.linked(u, v) {
                    triangles += 1;
                }
            }
        }
        total += 2.0 * triangles as f64 / (deg * (deg - 1)) as f64;
    }
    total / n as f64
}

/// Mean over nodes of the betweenness score
/// `Σ_{s<w, s≠v≠w} σ(s,w|v)/σ(s,w)`; pairs with no connecting path
/// contribute 0. Uses Brandes' dependency accumulation; each unordered
/// pair is visited from both endpoints, hence the final halving.
fn mean_betweenness(adj: &[Vec<usize>]) -> f64 {
    let n = adj.len();
    if n == 0 {
        return 0.0;
    }
    let mut centrality = vec![0.0f64; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = std::collections::VecDeque::new();

    for s in 0..n {
        order.clear();
        queue.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = 0.0;
            dist[v] = usize::MAX;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }

    centrality.iter().map(|c| c / 2.0).sum::<f64>() / n as f64
}
