//! Duffing-oscillator trajectory generation and train/test splitting.
//!
//! The forced Duffing oscillator
//! `q̈ + d·q̇ + k·q + k_nl·q³ = F·cos(Ω·t)`
//! is integrated with a fixed-step classical Runge–Kutta scheme so the
//! recorded samples sit on a strictly uniform time grid, which both the
//! visibility-graph construction and the reservoir update rely on.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt::g17;

/// Relative tolerance for the uniform-grid invariant of [`TimeSeries`].
const GRID_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DynamicsError {
    /// The trajectory left the representable range (diverged).
    #[error("state became non-finite at t = {t} (recorded sample {sample})")]
    NonFinite { t: f64, sample: usize },
    /// A split would leave fewer than 2 samples on one side.
    #[error("cannot split a {len}-sample series at fraction {fraction}: both parts need >= 2 samples")]
    TooShort { len: usize, fraction: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed series data: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parameters of the forced Duffing oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    /// Damping coefficient.
    pub damping: f64,
    /// Linear spring stiffness (may be negative for a double-well potential).
    pub stiffness: f64,
    /// Cubic spring stiffness.
    pub stiffness_cubic: f64,
    /// Forcing amplitude (>= 0).
    pub forcing_amplitude: f64,
    /// Forcing angular frequency (> 0).
    pub forcing_frequency: f64,
}

impl DuffingParams {
    /// Returns one of the three built-in parameter sets (1, 2 or 3).
    pub fn preset(set: u8) -> Option<Self> {
        match set {
            1 => Some(Self {
                damping: 0.02,
                stiffness: 1.0,
                stiffness_cubic: 5.0,
                forcing_frequency: 8.0,
                forcing_amplitude: 0.5,
            }),
            2 => Some(Self {
                damping: 0.1,
                stiffness: -1.0,
                stiffness_cubic: 0.25,
                forcing_frequency: 2.5,
                forcing_amplitude: 2.0,
            }),
            3 => Some(Self {
                damping: 0.1,
                stiffness: 1.0,
                stiffness_cubic: 2.0,
                forcing_frequency: 35.0,
                forcing_amplitude: 2.0,
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let all_finite = [
            self.damping,
            self.stiffness,
            self.stiffness_cubic,
            self.forcing_amplitude,
            self.forcing_frequency,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(DynamicsError::InvalidConfig(
                "all oscillator parameters must be finite".into(),
            ));
        }
        if self.forcing_frequency <= 0.0 {
            return Err(DynamicsError::InvalidConfig(
                "forcing frequency must be > 0".into(),
            ));
        }
        if self.forcing_amplitude < 0.0 {
            return Err(DynamicsError::InvalidConfig(
                "forcing amplitude must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Forcing value `F·cos(Ω·t)`.
    pub fn forcing(&self, t: f64) -> f64 {
        self.forcing_amplitude * (self.forcing_frequency * t).cos()
    }

    /// Period of the external forcing, `2π/Ω`.
    pub fn forcing_period(&self) -> f64 {
        std::f64::consts::TAU / self.forcing_frequency
    }
}

/// Simulation grid and initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Recording time step.
    pub dt_record: f64,
    /// Integrator steps per recorded sample.
    pub substeps: u32,
    /// Leading recorded samples discarded as transient.
    pub n_transient: usize,
    /// Total recorded samples (before transient removal).
    pub n_samples: usize,
    /// Initial position.
    pub q0: f64,
    /// Initial velocity.
    pub v0: f64,
}

impl SimConfig {
    /// Default grid for a parameter set: 100 recorded samples per forcing
    /// period, 12000 samples of which the first 2000 are dropped.
    pub fn for_params(p: &DuffingParams) -> Self {
        Self {
            dt_record: p.forcing_period() / 100.0,
            substeps: 1,
            n_transient: 2000,
            n_samples: 12000,
            q0: 1.0,
            v0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt_record.is_finite() && self.dt_record > 0.0) {
            return Err(DynamicsError::InvalidConfig(
                "dt_record must be finite and > 0".into(),
            ));
        }
        if self.substeps == 0 {
            return Err(DynamicsError::InvalidConfig("substeps must be >= 1".into()));
        }
        if self.n_samples <= self.n_transient {
            return Err(DynamicsError::InvalidConfig(
                "n_samples must exceed n_transient".into(),
            ));
        }
        if self.n_samples - self.n_transient < 2 {
            return Err(DynamicsError::InvalidConfig(
                "at least 2 samples must remain after transient removal".into(),
            ));
        }
        if !(self.q0.is_finite() && self.v0.is_finite()) {
            return Err(DynamicsError::InvalidConfig(
                "initial conditions must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// A uniformly sampled trajectory: times, positions, velocities and the
/// forcing signal evaluated at the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub g: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, checking that all columns have the same length >= 2
    /// and that the time grid is uniform (spacing deviations below 1e-12 of
    /// the series time scale) and strictly increasing.
    pub fn new(t: Vec<f64>, q: Vec<f64>, qdot: Vec<f64>, g: Vec<f64>) -> Result<Self, DynamicsError> {
        let n = t.len();
        if q.len() != n || qdot.len() != n || g.len() != n {
            return Err(DynamicsError::Parse(format!(
                "column lengths differ: t={}, q={}, qdot={}, g={}",
                n,
                q.len(),
                qdot.len(),
                g.len()
            )));
        }
        if n < 2 {
            return Err(DynamicsError::Parse(format!(
                "series needs at least 2 samples, got {n}"
            )));
        }
        for col in [&t, &q, &qdot, &g] {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(DynamicsError::Parse(format!(
                    "non-finite value at row {i}"
                )));
            }
        }
        let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
        if dt <= 0.0 {
            return Err(DynamicsError::Parse(
                "times must be strictly increasing".into(),
            ));
        }
        let scale = t[0].abs().max(t[n - 1].abs()).max(dt);
        for i in 0..n - 1 {
            let step = t[i + 1] - t[i];
            if step <= 0.0 || (step - dt).abs() > GRID_TOL * scale {
                return Err(DynamicsError::Parse(format!(
                    "non-uniform time grid at row {i}: step {step} vs mean {dt}"
                )));
            }
        }
        Ok(Self { t, q, qdot, g })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Recording time step (mean spacing; the grid is uniform by invariant).
    pub fn dt(&self) -> f64 {
        (self.t[self.len() - 1] - self.t[0]) / (self.len() - 1) as f64
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            t: self.t[range.clone()].to_vec(),
            q: self.q[range.clone()].to_vec(),
            qdot: self.qdot[range.clone()].to_vec(),
            g: self.g[range].to_vec(),
        }
    }

    /// Writes the series as CSV (`t,q,qdot,g`, 17 significant digits, rows
    /// in time order).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), DynamicsError> {
        writeln!(w, "t,q,qdot,g")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                g17(self.t[i]),
                g17(self.q[i]),
                g17(self.qdot[i]),
                g17(self.g[i])
            )?;
        }
        Ok(())
    }

    /// Reads a series written by [`TimeSeries::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, DynamicsError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| DynamicsError::Parse("empty file".into()))??;
        if header.trim() != "t,q,qdot,g" {
            return Err(DynamicsError::Parse(format!(
                "expected header 't,q,qdot,g', got '{header}'"
            )));
        }
        let (mut t, mut q, mut qdot, mut g) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(DynamicsError::Parse(format!(
                    "row {row}: expected 4 fields, got {}",
                    fields.len()
                )));
            }
            let mut parsed = [0.0; 4];
            for (k, f) in fields.iter().enumerate() {
                parsed[k] = f.trim().parse::<f64>().map_err(|e| {
                    DynamicsError::Parse(format!("row {row}, field {k}: {e}"))
                })?;
            }
            t.push(parsed[0]);
            q.push(parsed[1]);
            qdot.push(parsed[2]);
            g.push(parsed[3]);
        }
        Self::new(t, q, qdot, g)
    }
}

/// Right-hand side of the Duffing system in first-order form.
///
/// Returns `(q̇, q̈)` with `q̈ = F·cos(Ω·t) − d·q̇ − k·q − k_nl·q³`.
pub fn duffing_rhs(state: (f64, f64), t: f64, p: &DuffingParams) -> (f64, f64) {
    let (q, qdot) = state;
    let accel = p.forcing(t)
        - p.damping * qdot
        - p.stiffness * q
        - p.stiffness_cubic * q * q * q;
    (qdot, accel)
}

fn rk4_step(state: (f64, f64), t: f64, h: f64, p: &DuffingParams) -> (f64, f64) {
    let (q, v) = state;
    let (k1q, k1v) = duffing_rhs((q, v), t, p);
    let (k2q, k2v) = duffing_rhs((q + 0.5 * h * k1q, v + 0.5 * h * k1v), t + 0.5 * h, p);
    let (k3q, k3v) = duffing_rhs((q + 0.5 * h * k2q, v + 0.5 * h * k2v), t + 0.5 * h, p);
    let (k4q, k4v) = duffing_rhs((q + h * k3q, v + h * k3v), t + h, p);
    (
        q + h * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0,
        v + h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0,
    )
}

/// Integrates the Duffing system with fixed-step classical Runge–Kutta.
///
/// Sample `i` is recorded at `t = i·dt_record`; the first `n_transient`
/// recorded samples are dropped, so the result has
/// `n_samples − n_transient` rows. The internal step is
/// `dt_record / substeps`. Deterministic: identical inputs give
/// bit-identical outputs.
pub fn integrate(p: &DuffingParams, cfg: &SimConfig) -> Result<TimeSeries, DynamicsError> {
    p.validate()?;
    cfg.validate()?;

    let h = cfg.dt_record / cfg.substeps as f64;
    let kept = cfg.n_samples - cfg.n_transient;
    let mut t_out = Vec::with_capacity(kept);
    let mut q_out = Vec::with_capacity(kept);
    let mut v_out = Vec::with_capacity(kept);
    let mut g_out = Vec::with_capacity(kept);

    let mut state = (cfg.q0, cfg.v0);
    for i in 0..cfg.n_samples {
        let t_i = i as f64 * cfg.dt_record;
        if !(state.0.is_finite() && state.1.is_finite()) {
            return Err(DynamicsError::NonFinite { t: t_i, sample: i });
        }
        if i >= cfg.n_transient {
            t_out.push(t_i);
            q_out.push(state.0);
            v_out.push(state.1);
            g_out.push(p.forcing(t_i));
        }
        if i + 1 < cfg.n_samples {
            for s in 0..cfg.substeps {
                let t_sub = t_i + s as f64 * h;
                state = rk4_step(state, t_sub, h, p);
            }
        }
    }

    TimeSeries::new(t_out, q_out, v_out, g_out)
}

/// Splits a series into a contiguous train prefix and test suffix at
/// `floor(train_fraction · length)`. Concatenating the parts reproduces the
/// input element-wise.
pub fn split(ts: &TimeSeries, train_fraction: f64) -> Result<(TimeSeries, TimeSeries), DynamicsError> {
    if !(train_fraction.is_finite() && train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DynamicsError::InvalidConfig(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let len = ts.len();
    let cut = (train_fraction * len as f64).floor() as usize;
    if cut < 2 || len - cut < 2 {
        return Err(DynamicsError::TooShort {
            len,
            fraction: train_fraction,
        });
    }
    Ok((ts.slice(0..cut), ts.slice(cut..len)))
}
