//! Echo-state-network core: input layer, leaky-tanh state evolution,
//! ridge-regression readout and open/closed-loop prediction.
//!
//! The state update is
//! `r(t_{k+1}) = (1−α)·r(t_k) + α·tanh(A·r(t_k) + W_in·x(t_k))`
//! and the output is the linear readout `y(t_k) = W_out·r(t_k)`. Only the
//! readout is trained; the reservoir matrix `A` and the input layer `W_in`
//! stay fixed.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt::g17;

#[derive(Debug, Error)]
pub enum ReservoirError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("normal equations are numerically singular (residual {residual:.3e}); raise the ridge coefficient")]
    SingularSystem { residual: f64 },
    #[error("model has no trained readout")]
    NotTrained,
    #[error("prediction diverged to non-finite values at step {step}")]
    NonFinite { step: usize },
    #[error("malformed model data: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Hyperparameters of a reservoir computer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    /// Reservoir size N.
    pub n_nodes: usize,
    /// Input dimension m.
    pub n_inputs: usize,
    /// Leakage α in [0, 1].
    pub alpha: f64,
    /// Fraction of nodes receiving input, in (0, 1].
    pub input_fraction: f64,
    /// Ridge regularization coefficient (>= 0).
    pub ridge_lambda: f64,
    /// Initial states discarded before the readout regression.
    pub washout: usize,
    /// Spectral radius the reservoir matrix is scaled to.
    pub spectral_target: f64,
}

impl Default for ReservoirParams {
    fn default() -> Self {
        Self {
            n_nodes: 100,
            n_inputs: 3,
            alpha: 0.5,
            input_fraction: 0.5,
            ridge_lambda: 1e-6,
            washout: 100,
            spectral_target: 0.9,
        }
    }
}

impl ReservoirParams {
    pub fn validate(&self) -> Result<(), ReservoirError> {
        if self.n_nodes == 0 || self.n_inputs == 0 {
            return Err(ReservoirError::DimensionMismatch(
                "n_nodes and n_inputs must be >= 1".into(),
            ));
        }
        if !(self.alpha.is_finite() && (0.0..=1.0).contains(&self.alpha)) {
            return Err(ReservoirError::DimensionMismatch(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.input_fraction.is_finite()
            && self.input_fraction > 0.0
            && self.input_fraction <= 1.0)
        {
            return Err(ReservoirError::DimensionMismatch(format!(
                "input fraction must be in (0, 1], got {}",
                self.input_fraction
            )));
        }
        if !(self.ridge_lambda.is_finite() && self.ridge_lambda >= 0.0) {
            return Err(ReservoirError::DimensionMismatch(format!(
                "ridge lambda must be >= 0, got {}",
                self.ridge_lambda
            )));
        }
        if !(self.spectral_target.is_finite() && self.spectral_target > 0.0) {
            return Err(ReservoirError::DimensionMismatch(format!(
                "spectral target must be > 0, got {}",
                self.spectral_target
            )));
        }
        Ok(())
    }
}

/// A reservoir computer: fixed adjacency and input layer, tanh activation,
/// and (after training) a linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirModel {
    adjacency: DMatrix<f64>,
    w_in: DMatrix<f64>,
    w_out: Option<DMatrix<f64>>,
    alpha: f64,
    spectral_target: f64,
    seed: u64,
}

impl ReservoirModel {
    /// Assembles a model from a reservoir matrix (already scaled to its
    /// spectral target) and an input layer.
    pub fn new(
        adjacency: DMatrix<f64>,
        w_in: DMatrix<f64>,
        alpha: f64,
        spectral_target: f64,
        seed: u64,
    ) -> Result<Self, ReservoirError> {
        if adjacency.nrows() != adjacency.ncols() {
            return Err(ReservoirError::DimensionMismatch(format!(
                "adjacency must be square, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if w_in.nrows() != adjacency.nrows() {
            return Err(ReservoirError::DimensionMismatch(format!(
                "input layer has {} rows but the reservoir has {} nodes",
                w_in.nrows(),
                adjacency.nrows()
            )));
        }
        if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
            return Err(ReservoirError::DimensionMismatch(format!(
                "alpha must be in [0, 1], got {alpha}"
            )));
        }
        Ok(Self {
            adjacency,
            w_in,
            w_out: None,
            alpha,
            spectral_target,
            seed,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn spectral_target(&self) -> f64 {
        self.spectral_target
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn w_in(&self) -> &DMatrix<f64> {
        &self.w_in
    }

    pub fn w_out(&self) -> Option<&DMatrix<f64>> {
        self.w_out.as_ref()
    }

    pub fn is_trained(&self) -> bool {
        self.w_out.is_some()
    }

    /// Installs a trained readout.
    pub fn set_readout(&mut self, w_out: DMatrix<f64>) -> Result<(), ReservoirError> {
        if w_out.ncols() != self.n_nodes() {
            return Err(ReservoirError::DimensionMismatch(format!(
                "readout has {} columns but the reservoir has {} nodes",
                w_out.ncols(),
                self.n_nodes()
            )));
        }
        self.w_out = Some(w_out);
        Ok(())
    }

    /// One state update in place: `r ← (1−α)·r + α·tanh(A·r + W_in·x)`.
    /// `scratch` must have length N.
    fn step(&self, r: &mut DVector<f64>, scratch: &mut DVector<f64>, x: &DVector<f64>) {
        scratch.gemv(1.0, &self.adjacency, r, 0.0);
        scratch.gemv(1.0, &self.w_in, x, 1.0);
        let keep = 1.0 - self.alpha;
        for i in 0..r.len() {
            r[i] = keep * r[i] + self.alpha * scratch[i].tanh();
        }
    }
}

/// Reservoir states collected over a run, one column per time step.
/// Column `k` is the state that produces output `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub states: DMatrix<f64>,
}

impl StateMatrix {
    pub fn n_nodes(&self) -> usize {
        self.states.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.states.ncols()
    }
}

/// Builds an input layer with exactly `ceil(input_fraction·n)` nonzero
/// rows, chosen uniformly without replacement; nonzero entries are drawn
/// uniformly from [−1, 1]. Deterministic given the generator state.
pub fn build_input_layer<R: Rng>(
    n: usize,
    m: usize,
    input_fraction: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>, ReservoirError> {
    if n == 0 || m == 0 {
        return Err(ReservoirError::DimensionMismatch(
            "input layer needs n >= 1 and m >= 1".into(),
        ));
    }
    if !(input_fraction.is_finite() && input_fraction > 0.0 && input_fraction <= 1.0) {
        return Err(ReservoirError::DimensionMismatch(format!(
            "input fraction must be in (0, 1], got {input_fraction}"
        )));
    }
    let k = (input_fraction * n as f64).ceil() as usize;
    let rows = rand::seq::index::sample(rng, n, k);
    let mut w_in = DMatrix::zeros(n, m);
    for i in rows {
        for j in 0..m {
            w_in[(i, j)] = rng.random_range(-1.0..=1.0);
        }
    }
    Ok(w_in)
}

/// Runs the reservoir over an input sequence (`m×T`, one column per step)
/// from the initial state `r0` and returns all visited states.
pub fn evolve(
    model: &ReservoirModel,
    inputs: &DMatrix<f64>,
    r0: &DVector<f64>,
) -> Result<StateMatrix, ReservoirError> {
    let n = model.n_nodes();
    if inputs.nrows() != model.n_inputs() {
        return Err(ReservoirError::DimensionMismatch(format!(
            "inputs have {} rows but the model expects {}",
            inputs.nrows(),
            model.n_inputs()
        )));
    }
    if r0.len() != n {
        return Err(ReservoirError::DimensionMismatch(format!(
            "initial state has length {} but the reservoir has {} nodes",
            r0.len(),
            n
        )));
    }
    let t = inputs.ncols();
    let mut states = DMatrix::zeros(n, t);
    let mut r = r0.clone();
    let mut scratch = DVector::zeros(n);
    for k in 0..t {
        let x = inputs.column(k).clone_owned();
        model.step(&mut r, &mut scratch, &x);
        states.column_mut(k).copy_from(&r);
    }
    Ok(StateMatrix { states })
}

/// Maximum relative residual accepted for the readout's normal equations.
const RIDGE_RESIDUAL_TOL: f64 = 1e-8;

/// Solves the ridge-regression readout
/// `W_out = Y'·R'ᵀ·(R'·R'ᵀ + λI)⁻¹`
/// on the washout-trimmed states `R'` and targets `Y'`.
///
/// The symmetric system is solved by Cholesky with an LU fallback and the
/// result is verified against the normal equations:
/// `‖(R'R'ᵀ+λI)·W_outᵀ − R'Y'ᵀ‖ ≤ 1e-8·‖R'Y'ᵀ‖`.
pub fn train_readout(
    states: &StateMatrix,
    targets: &DMatrix<f64>,
    lambda: f64,
    washout: usize,
) -> Result<DMatrix<f64>, ReservoirError> {
    let n = states.n_nodes();
    let t = states.n_steps();
    if targets.ncols() != t {
        return Err(ReservoirError::ShapeMismatch {
            expected_rows: targets.nrows(),
            expected_cols: t,
            rows: targets.nrows(),
            cols: targets.ncols(),
        });
    }
    if washout >= t {
        return Err(ReservoirError::DimensionMismatch(format!(
            "washout {washout} leaves no training columns (T = {t})"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(ReservoirError::DimensionMismatch(format!(
            "ridge lambda must be >= 0, got {lambda}"
        )));
    }
    let kept = t - washout;
    if kept <= n {
        log::warn!(
            "readout regression has only {kept} samples for {n} reservoir nodes; \
             the system is underdetermined"
        );
    }

    let r = states.states.columns(washout, kept);
    let y = targets.columns(washout, kept);
    let mut gram = &r * r.transpose();
    for i in 0..n {
        gram[(i, i)] += lambda;
    }
    let rhs = &r * y.transpose();

    let solution = gram
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| gram.clone().lu().solve(&rhs))
        .ok_or(ReservoirError::SingularSystem {
            residual: f64::INFINITY,
        })?;

    let residual = (&gram * &solution - &rhs).norm();
    if residual > RIDGE_RESIDUAL_TOL * rhs.norm() {
        return Err(ReservoirError::SingularSystem {
            residual: residual / rhs.norm(),
        });
    }
    Ok(solution.transpose())
}

/// Teacher-forced one-step prediction: evolves the reservoir on the true
/// inputs from a zero initial state and applies the readout to every state.
pub fn predict_open_loop(
    model: &ReservoirModel,
    inputs: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ReservoirError> {
    let w_out = model.w_out().ok_or(ReservoirError::NotTrained)?;
    let r0 = DVector::zeros(model.n_nodes());
    let states = evolve(model, inputs, &r0)?;
    Ok(w_out * &states.states)
}

/// Free-running prediction driven only by the exogenous forcing: each step
/// feeds the previous output back as the state part of the input,
/// `x(t_k) = [ŷ(t_{k−1}), forcing(t_k)]`, starting from `y_init` and a zero
/// reservoir state.
pub fn predict_closed_loop(
    model: &ReservoirModel,
    forcing: &[f64],
    y_init: &[f64],
) -> Result<DMatrix<f64>, ReservoirError> {
    let w_out = model.w_out().ok_or(ReservoirError::NotTrained)?;
    let m_out = w_out.nrows();
    if model.n_inputs() != m_out + 1 {
        return Err(ReservoirError::DimensionMismatch(format!(
            "closed loop needs m = m_out + 1 inputs (got m = {}, m_out = {m_out})",
            model.n_inputs()
        )));
    }
    if y_init.len() != m_out {
        return Err(ReservoirError::DimensionMismatch(format!(
            "y_init has length {} but the readout produces {m_out} outputs",
            y_init.len()
        )));
    }
    let n = model.n_nodes();
    let t = forcing.len();
    let mut outputs = DMatrix::zeros(m_out, t);
    let mut r = DVector::zeros(n);
    let mut scratch = DVector::zeros(n);
    let mut x = DVector::zeros(m_out + 1);
    let mut y_prev = DVector::from_column_slice(y_init);
    for k in 0..t {
        x.rows_mut(0, m_out).copy_from(&y_prev);
        x[m_out] = forcing[k];
        model.step(&mut r, &mut scratch, &x);
        let y = w_out * &r;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ReservoirError::NonFinite { step: k });
        }
        outputs.column_mut(k).copy_from(&y);
        y_prev = y;
    }
    Ok(outputs)
}

/// Mean absolute error over all entries of two equally shaped matrices.
pub fn mae(y_hat: &DMatrix<f64>, y_test: &DMatrix<f64>) -> Result<f64, ReservoirError> {
    if y_hat.shape() != y_test.shape() {
        return Err(ReservoirError::ShapeMismatch {
            expected_rows: y_test.nrows(),
            expected_cols: y_test.ncols(),
            rows: y_hat.nrows(),
            cols: y_hat.ncols(),
        });
    }
    let count = y_hat.len();
    if count == 0 {
        return Ok(0.0);
    }
    let total: f64 = y_hat
        .iter()
        .zip(y_test.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / count as f64)
}

// ── Model archive ────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct ArchiveHeader {
    n: usize,
    m: usize,
    alpha: f64,
    spectral_target: f64,
    seed: u64,
}

fn write_block<W: Write>(w: &mut W, name: &str, m: &DMatrix<f64>) -> Result<(), ReservoirError> {
    writeln!(w, "# {name} {} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| g17(m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn read_block<R: BufRead>(
    lines: &mut std::io::Lines<R>,
    name: &str,
) -> Result<Option<DMatrix<f64>>, ReservoirError> {
    let marker = match lines.next() {
        None => return Ok(None),
        Some(line) => line?,
    };
    let rest = marker
        .strip_prefix("# ")
        .ok_or_else(|| ReservoirError::Parse(format!("expected block marker, got '{marker}'")))?;
    let mut parts = rest.split_whitespace();
    let got_name = parts
        .next()
        .ok_or_else(|| ReservoirError::Parse("empty block marker".into()))?;
    if got_name != name {
        return Err(ReservoirError::Parse(format!(
            "expected block '{name}', got '{got_name}'"
        )));
    }
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ReservoirError::Parse(format!("bad row count in '{marker}'")))?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ReservoirError::Parse(format!("bad column count in '{marker}'")))?;
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| ReservoirError::Parse(format!("block '{name}' truncated at row {i}")))??;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(ReservoirError::Parse(format!(
                "block '{name}' row {i}: expected {cols} fields, got {}",
                fields.len()
            )));
        }
        for (j, f) in fields.iter().enumerate() {
            m[(i, j)] = f.trim().parse().map_err(|e| {
                ReservoirError::Parse(format!("block '{name}' row {i} col {j}: {e}"))
            })?;
        }
    }
    Ok(Some(m))
}

impl ReservoirModel {
    /// Serializes the model as a JSON header followed by dense row-major
    /// CSV blocks for `A`, `W_in` and (when trained) `W_out`. The archive
    /// round-trips bit-exactly.
    pub fn write_archive<W: Write>(&self, w: &mut W) -> Result<(), ReservoirError> {
        let header = ArchiveHeader {
            n: self.n_nodes(),
            m: self.n_inputs(),
            alpha: self.alpha,
            spectral_target: self.spectral_target,
            seed: self.seed,
        };
        let json = serde_json::to_string(&header)
            .map_err(|e| ReservoirError::Parse(format!("header serialization failed: {e}")))?;
        writeln!(w, "{json}")?;
        write_block(w, "A", &self.adjacency)?;
        write_block(w, "W_in", &self.w_in)?;
        if let Some(w_out) = &self.w_out {
            write_block(w, "W_out", w_out)?;
        }
        Ok(())
    }

    /// Reads an archive written by [`ReservoirModel::write_archive`].
    pub fn read_archive<R: BufRead>(r: R) -> Result<Self, ReservoirError> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| ReservoirError::Parse("empty archive".into()))??;
        let header: ArchiveHeader = serde_json::from_str(&header_line)
            .map_err(|e| ReservoirError::Parse(format!("bad header: {e}")))?;
        let adjacency = read_block(&mut lines, "A")?
            .ok_or_else(|| ReservoirError::Parse("missing block 'A'".into()))?;
        let w_in = read_block(&mut lines, "W_in")?
            .ok_or_else(|| ReservoirError::Parse("missing block 'W_in'".into()))?;
        if adjacency.nrows() != header.n || w_in.ncols() != header.m {
            return Err(ReservoirError::Parse(
                "header dimensions disagree with the stored blocks".into(),
            ));
        }
        let mut model = Self::new(
            adjacency,
            w_in,
            header.alpha,
            header.spectral_target,
            header.seed,
        )?;
        if let Some(w_out) = read_block(&mut lines, "W_out")? {
            model.set_readout(w_out)?;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_model(n: usize, m: usize, alpha: f64, seed: u64) -> ReservoirModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random::<f64>() < 0.3 {
                    a[(i, j)] = rng.random_range(-0.2..=0.2);
                }
            }
        }
        let w_in = build_input_layer(n, m, 0.5, &mut rng).unwrap();
        ReservoirModel::new(a, w_in, alpha, 0.9, seed).unwrap()
    }

    #[test]
    fn input_layer_row_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = build_input_layer(4, 2, 0.5, &mut rng).unwrap();
        let nonzero_rows = (0..4)
            .filter(|&i| (0..2).any(|j| w[(i, j)] != 0.0))
            .count();
        assert_eq!(nonzero_rows, 2);

        let w_full = build_input_layer(4, 2, 1.0, &mut rng).unwrap();
        let full_rows = (0..4)
            .filter(|&i| (0..2).any(|j| w_full[(i, j)] != 0.0))
            .count();
        assert_eq!(full_rows, 4);
    }

    #[test]
    fn input_layer_deterministic() {
        let w1 = build_input_layer(100, 3, 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let w2 = build_input_layer(100, 3, 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn zero_weights_decay_geometrically() {
        let n = 4;
        let a = DMatrix::zeros(n, n);
        let w_in = DMatrix::zeros(n, 2);
        let model = ReservoirModel::new(a, w_in, 0.25, 0.9, 0).unwrap();
        let r0 = DVector::from_vec(vec![1.0, -0.5, 0.25, 0.8]);
        let inputs = DMatrix::zeros(2, 6);
        let states = evolve(&model, &inputs, &r0).unwrap();
        for k in 0..6 {
            let decay = 0.75f64.powi(k as i32 + 1);
            for i in 0..n {
                assert_relative_eq!(states.states[(i, k)], r0[i] * decay, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_state_zero_input_stays_zero() {
        let model = toy_model(6, 2, 0.5, 1);
        let inputs = DMatrix::zeros(2, 10);
        let states = evolve(&model, &inputs, &DVector::zeros(6)).unwrap();
        assert!(states.states.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alpha_zero_freezes_state() {
        let model = toy_model(5, 2, 0.0, 2);
        let r0 = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inputs = DMatrix::from_fn(2, 8, |_, _| rng.random_range(-1.0..=1.0));
        let states = evolve(&model, &inputs, &r0).unwrap();
        for k in 0..8 {
            for i in 0..5 {
                assert_eq!(states.states[(i, k)], r0[i]);
            }
        }
    }

    #[test]
    fn states_stay_inside_unit_box() {
        let model = toy_model(8, 2, 0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inputs = DMatrix::from_fn(2, 200, |_, _| rng.random_range(-5.0..=5.0));
        let states = evolve(&model, &inputs, &DVector::zeros(8)).unwrap();
        assert!(states.states.iter().all(|&v| v.abs() < 1.0));
    }

    #[test]
    fn scalar_least_squares() {
        let states = StateMatrix {
            states: DMatrix::from_element(1, 5, 1.0),
        };
        let targets = DMatrix::from_element(1, 5, 2.0);
        let w = train_readout(&states, &targets, 0.0, 0).unwrap();
        assert_eq!(w.shape(), (1, 1));
        assert_relative_eq!(w[(0, 0)], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn ridge_shrinks_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let states = StateMatrix {
            states: DMatrix::from_fn(5, 40, |_, _| rng.random_range(-1.0..=1.0)),
        };
        let targets = DMatrix::from_fn(2, 40, |_, _| rng.random_range(-1.0..=1.0));
        let mut prev_norm = f64::INFINITY;
        for lambda in [0.0, 1.0, 1e3, 1e6, 1e12] {
            let w = train_readout(&states, &targets, lambda, 0).unwrap();
            let norm = w.norm();
            assert!(norm <= prev_norm + 1e-12, "norm grew at lambda {lambda}");
            prev_norm = norm;
        }
        assert!(prev_norm < 1e-9, "readout should vanish at huge lambda");
    }

    #[test]
    fn washout_drops_exact_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let full = DMatrix::from_fn(4, 30, |_, _| rng.random_range(-1.0..=1.0));
        let targets = DMatrix::from_fn(2, 30, |_, _| rng.random_range(-1.0..=1.0));
        let w_washout = train_readout(
            &StateMatrix { states: full.clone() },
            &targets,
            1e-6,
            7,
        )
        .unwrap();
        let trimmed = StateMatrix {
            states: full.columns(7, 23).clone_owned(),
        };
        let w_manual =
            train_readout(&trimmed, &targets.columns(7, 23).clone_owned(), 1e-6, 0).unwrap();
        assert_eq!(w_washout, w_manual);
    }

    #[test]
    fn untrained_model_cannot_predict() {
        let model = toy_model(4, 3, 0.5, 4);
        let inputs = DMatrix::zeros(3, 5);
        assert!(matches!(
            predict_open_loop(&model, &inputs),
            Err(ReservoirError::NotTrained)
        ));
        assert!(matches!(
            predict_closed_loop(&model, &[0.0; 5], &[0.0, 0.0]),
            Err(ReservoirError::NotTrained)
        ));
    }

    #[test]
    fn zero_readout_gives_zero_outputs() {
        let mut model = toy_model(4, 3, 0.5, 5);
        model.set_readout(DMatrix::zeros(2, 4)).unwrap();
        let out = predict_closed_loop(&model, &[0.0; 6], &[0.0, 0.0]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_matches_open_loop() {
        let mut model = toy_model(6, 3, 0.5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        model
            .set_readout(DMatrix::from_fn(2, 6, |_, _| rng.random_range(-1.0..=1.0)))
            .unwrap();
        let y_init = [0.3, -0.2];
        let forcing = [0.7];
        let closed = predict_closed_loop(&model, &forcing, &y_init).unwrap();
        let inputs = DMatrix::from_column_slice(3, 1, &[y_init[0], y_init[1], forcing[0]]);
        let open = predict_open_loop(&model, &inputs).unwrap();
        assert_eq!(closed, open);
    }

    #[test]
    fn mae_examples() {
        let y = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let y_hat = DMatrix::from_row_slice(1, 2, &[0.0, 2.0]);
        assert_eq!(mae(&y_hat, &y).unwrap(), 1.5);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        let shifted = y.map(|v| v + 0.5);
        assert_eq!(mae(&shifted, &y).unwrap(), 0.5);
        let wrong = DMatrix::zeros(2, 2);
        assert!(matches!(
            mae(&wrong, &y),
            Err(ReservoirError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn archive_round_trip_bit_exact() {
        let mut model = toy_model(7, 3, 0.5, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        model
            .set_readout(DMatrix::from_fn(2, 7, |_, _| rng.random_range(-1.0..=1.0)))
            .unwrap();
        let mut buf = Vec::new();
        model.write_archive(&mut buf).unwrap();
        let back = ReservoirModel::read_archive(buf.as_slice()).unwrap();
        assert_eq!(model, back);

        // Untrained models round-trip too.
        let untrained = toy_model(4, 2, 0.25, 43);
        let mut buf = Vec::new();
        untrained.write_archive(&mut buf).unwrap();
        let back = ReservoirModel::read_archive(buf.as_slice()).unwrap();
        assert_eq!(untrained, back);
        assert!(!back.is_trained());
    }
}
