//! Readout training against an explicit normal-equations oracle and the
//! end-to-end sanity of trained models on the oscillator task.

use dyrc_core::dynamics::{integrate, split, DuffingParams, SimConfig};
use dyrc_core::graphs::{erdos_renyi, scale_to_spectral_radius};
use dyrc_core::reservoir::{
    build_input_layer, evolve, mae, predict_open_loop, train_readout, ReservoirModel, StateMatrix,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference ridge solution via the explicit inverse:
/// `W = Y·Rᵀ·(R·Rᵀ + λI)⁻¹`.
fn ridge_oracle(r: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = r.nrows();
    let gram = r * r.transpose() + DMatrix::identity(n, n) * lambda;
    let inv = gram.try_inverse().expect("oracle gram not invertible");
    y * r.transpose() * inv
}

#[test]
fn readout_matches_normal_equations_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..50 {
        let n = rng.random_range(3..=12);
        let t = rng.random_range(20..=60);
        let m_out = rng.random_range(1..=3);
        let lambda = [0.0, 1e-6, 1e-3, 1e-1][case % 4];
        let states = StateMatrix {
            states: DMatrix::from_fn(n, t, |_, _| rng.random_range(-1.0..=1.0)),
        };
        let targets = DMatrix::from_fn(m_out, t, |_, _| rng.random_range(-1.0..=1.0));
        let w = train_readout(&states, &targets, lambda, 0).unwrap();
        let w_ref = ridge_oracle(&states.states, &targets, lambda);
        let diff = (&w - &w_ref).norm() / w_ref.norm().max(1e-30);
        assert!(
            diff <= 1e-9,
            "case {case} (n={n}, t={t}, lambda={lambda}): relative diff {diff:.3e}"
        );
    }
}

/// Builds and trains a small reservoir on a Duffing trajectory, returning
/// (model, training inputs, training targets).
fn trained_on_set(
    set: u8,
    n: usize,
    seed: u64,
) -> (ReservoirModel, DMatrix<f64>, DMatrix<f64>) {
    let p = DuffingParams::preset(set).unwrap();
    let cfg = SimConfig {
        n_samples: 2600,
        n_transient: 100,
        ..SimConfig::for_params(&p)
    };
    let ts = integrate(&p, &cfg).unwrap();
    let (train, _test) = split(&ts, 0.8).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = erdos_renyi(n, 0.1, &mut rng).unwrap();
    let scaled = scale_to_spectral_radius(&graph, 0.9).unwrap();
    let w_in = build_input_layer(n, 3, 0.5, &mut rng).unwrap();
    let mut model = ReservoirModel::new(scaled.weights().clone(), w_in, 0.5, 0.9, seed).unwrap();

    let t = train.len() - 1;
    let inputs = DMatrix::from_fn(3, t, |row, j| match row {
        0 => train.q[j],
        1 => train.qdot[j],
        _ => train.g[j + 1],
    });
    let targets = DMatrix::from_fn(2, t, |row, j| match row {
        0 => train.q[j + 1],
        _ => train.qdot[j + 1],
    });
    let states = evolve(&model, &inputs, &DVector::zeros(n)).unwrap();
    let w_out = train_readout(&states, &targets, 1e-6, 100).unwrap();
    model.set_readout(w_out).unwrap();
    (model, inputs, targets)
}

#[test]
fn trained_model_beats_mean_predictor_on_all_sets() {
    for set in 1..=3u8 {
        let (model, inputs, targets) = trained_on_set(set, 60, 100 + set as u64);
        let predictions = predict_open_loop(&model, &inputs).unwrap();
        let model_mae = mae(&predictions, &targets).unwrap();

        let mut mean_pred = DMatrix::zeros(2, targets.ncols());
        for row in 0..2 {
            let mean = targets.row(row).iter().sum::<f64>() / targets.ncols() as f64;
            mean_pred.row_mut(row).fill(mean);
        }
        let mean_mae = mae(&mean_pred, &targets).unwrap();
        assert!(
            model_mae < mean_mae,
            "set {set}: trained MAE {model_mae:.3e} not below mean-predictor {mean_mae:.3e}"
        );
    }
}

#[test]
fn states_bounded_on_duffing_task() {
    let (model, inputs, _) = trained_on_set(1, 40, 7);
    let states = evolve(&model, &inputs, &DVector::zeros(40)).unwrap();
    assert!(states.states.iter().all(|v| v.abs() < 1.0));
}

#[test]
fn full_pipeline_is_deterministic() {
    let (m1, _, _) = trained_on_set(1, 30, 11);
    let (m2, _, _) = trained_on_set(1, 30, 11);
    assert_eq!(m1, m2);
    let (m3, _, _) = trained_on_set(1, 30, 12);
    assert_ne!(m1, m3);
}
