//! Visibility-graph correctness against a naive reference implementation,
//! plus the structural invariants every visibility graph must satisfy.

use dyrc_core::graphs::{visibility_graph, WeightedDigraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference implementation: the visibility criterion checked literally
/// with a triple loop. Edge (i, j), i < j, exists iff every intermediate
/// point lies strictly below the chord:
/// `x_l < x_j + (x_i − x_j)·(t_j − t_l)/(t_j − t_i)`.
fn naive_visibility(values: &[f64], times: &[f64]) -> Vec<Vec<bool>> {
    let n = values.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let mut visible = true;
            for l in i + 1..j {
                let chord =
                    values[j] + (values[i] - values[j]) * (times[j] - times[l]) / (times[j] - times[i]);
                if values[l] >= chord {
                    visible = false;
                    break;
                }
            }
            if visible {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    adj
}

fn assert_matches_naive(values: &[f64], times: &[f64]) {
    let g = visibility_graph(values, times).unwrap();
    let oracle = naive_visibility(values, times);
    for i in 0..values.len() {
        for j in 0..values.len() {
            let got = g.weight(i, j) != 0.0;
            assert_eq!(
                got, oracle[i][j],
                "edge ({i}, {j}) mismatch for values {values:?}"
            );
        }
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[test]
fn matches_naive_on_random_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..300 {
        let n = rng.random_range(2..=64);
        let values: Vec<f64> = if case % 2 == 0 {
            (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()
        } else {
            (0..n).map(|_| gaussian(&mut rng)).collect()
        };
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        assert_matches_naive(&values, &times);
    }
}

#[test]
fn matches_naive_on_irregular_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.random_range(2..=40);
        let values: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        let mut times = vec![0.0];
        for _ in 1..n {
            let last = *times.last().unwrap();
            times.push(last + rng.random_range(0.1..2.0));
        }
        assert_matches_naive(&values, &times);
    }
}

#[test]
fn matches_naive_on_duffing_sections() {
    use dyrc_core::dynamics::{integrate, DuffingParams, SimConfig};
    let p = DuffingParams::preset(1).unwrap();
    let cfg = SimConfig {
        n_samples: 400,
        n_transient: 200,
        ..SimConfig::for_params(&p)
    };
    let ts = integrate(&p, &cfg).unwrap();
    for (start, len) in [(0, 50), (60, 64), (100, 40)] {
        assert_matches_naive(&ts.q[start..start + len], &ts.t[start..start + len]);
    }
}

fn edge_set(g: &WeightedDigraph) -> Vec<(usize, usize)> {
    let n = g.node_count();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if g.weight(i, j) != 0.0 {
                edges.push((i, j));
            }
        }
    }
    edges
}

proptest! {
    #[test]
    fn consecutive_points_always_connected(
        values in prop::collection::vec(-100.0f64..100.0, 2..48)
    ) {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let g = visibility_graph(&values, &times).unwrap();
        for i in 0..values.len() - 1 {
            prop_assert!(g.weight(i, i + 1) != 0.0, "missing edge ({i}, {})", i + 1);
        }
    }

    #[test]
    fn affine_transform_preserves_graph(
        values in prop::collection::vec(-10.0f64..10.0, 2..40),
        a in 0.1f64..10.0,
        b in -5.0f64..5.0,
    ) {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let transformed: Vec<f64> = values.iter().map(|x| a * x + b).collect();
        let g1 = visibility_graph(&values, &times).unwrap();
        let g2 = visibility_graph(&transformed, &times).unwrap();
        prop_assert_eq!(edge_set(&g1), edge_set(&g2));
    }

    #[test]
    fn time_rescaling_preserves_graph(
        values in prop::collection::vec(-10.0f64..10.0, 2..40),
        c in 0.1f64..10.0,
        s in -100.0f64..100.0,
    ) {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let rescaled: Vec<f64> = times.iter().map(|t| c * t + s).collect();
        let g1 = visibility_graph(&values, &times).unwrap();
        let g2 = visibility_graph(&values, &rescaled).unwrap();
        prop_assert_eq!(edge_set(&g1), edge_set(&g2));
    }

    #[test]
    fn strictly_convex_series_is_complete(
        a in 0.01f64..5.0,
        b in -10.0f64..10.0,
        c in -10.0f64..10.0,
        n in 3usize..40,
    ) {
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| a * t * t + b * t + c).collect();
        let g = visibility_graph(&values, &times).unwrap();
        prop_assert_eq!(edge_set(&g).len(), n * (n - 1) / 2);
    }

    #[test]
    fn monotone_concave_series_is_path(
        n in 3usize..40,
    ) {
        // A strictly concave series: every non-adjacent pair is blocked.
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| -(t * t)).collect();
        let g = visibility_graph(&values, &times).unwrap();
        prop_assert_eq!(edge_set(&g).len(), n - 1);
    }
}
