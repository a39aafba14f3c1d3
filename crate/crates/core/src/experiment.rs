//! The four-variant benchmark sweep: reservoir construction per variant,
//! replicate execution, deterministic parallel scheduling and result
//! aggregation.
//!
//! Replicates are independent tasks. Each derives its own ChaCha stream
//! from `(master seed, variant, size, replicate)`, so results are
//! reproducible and independent of execution order and thread count. With
//! the `parallel` feature the sweep runs on rayon; [`run_sweep_seq`] is the
//! sequential fallback with identical output.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{integrate, split, DuffingParams, DynamicsError, SimConfig, TimeSeries};
use crate::fmt::g17;
use crate::graphs::{
    erdos_renyi, metrics, sample_sections, sample_sections_random, scale_to_spectral_radius,
    visibility_graph, GraphError, NetworkMetrics, Section, WeightedDigraph,
};
use crate::reservoir::{
    build_input_layer, evolve, mae, predict_closed_loop, predict_open_loop, train_readout,
    ReservoirError, ReservoirModel, ReservoirParams,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("malformed results data: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The four reservoir construction schemes under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Random reservoir with fixed edge probability (default 0.1).
    #[serde(rename = "ER")]
    Er,
    /// Random reservoir whose edge probability equals the measured density
    /// of the paired stride-1 visibility graph, replicate by replicate.
    #[serde(rename = "DenseER")]
    DenseEr,
    /// Visibility graph of a stride-1 training section.
    #[serde(rename = "DyRC_VG")]
    DyrcVg,
    /// Visibility graph of a stride-16 (down-sampled) training section.
    #[serde(rename = "DyRC_VG_16")]
    DyrcVg16,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Er,
        Variant::DenseEr,
        Variant::DyrcVg,
        Variant::DyrcVg16,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Variant::Er => "ER",
            Variant::DenseEr => "DenseER",
            Variant::DyrcVg => "DyRC_VG",
            Variant::DyrcVg16 => "DyRC_VG_16",
        }
    }

    pub fn parse_tag(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|v| v.tag() == s)
    }

    /// Section stride for the visibility-graph variants.
    pub fn stride(&self) -> Option<usize> {
        match self {
            Variant::DyrcVg => Some(1),
            Variant::DyrcVg16 => Some(16),
            _ => None,
        }
    }

    /// RNG stream tag; 0 is reserved for section sampling.
    fn stream_tag(&self) -> u64 {
        match self {
            Variant::Er => 1,
            Variant::DenseEr => 2,
            Variant::DyrcVg => 3,
            Variant::DyrcVg16 => 4,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Prediction mode used for the recorded error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    /// Teacher-forced one-step prediction on the true test inputs.
    #[serde(rename = "open")]
    Open,
    /// Free-running prediction driven only by the test forcing.
    #[serde(rename = "closed")]
    Closed,
}

impl EvalMode {
    pub fn tag(&self) -> &'static str {
        match self {
            EvalMode::Open => "open",
            EvalMode::Closed => "closed",
        }
    }

    pub fn parse_tag(s: &str) -> Option<Self> {
        match s {
            "open" => Some(EvalMode::Open),
            "closed" => Some(EvalMode::Closed),
            _ => None,
        }
    }
}

/// How section start indices are placed within the training series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionMode {
    /// Evenly spaced over the feasible range (deterministic).
    #[serde(rename = "evenly")]
    Evenly,
    /// Seeded uniform-random starts.
    #[serde(rename = "random")]
    Random,
}

/// Simulation overrides; `dt_record = None` selects 100 samples per
/// forcing period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub dt_record: Option<f64>,
    pub substeps: u32,
    pub n_samples: usize,
    pub n_transient: usize,
    pub q0: f64,
    pub v0: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt_record: None,
            substeps: 1,
            n_samples: 12000,
            n_transient: 2000,
            q0: 1.0,
            v0: 0.0,
        }
    }
}

impl SimSettings {
    pub fn resolve(&self, params: &DuffingParams) -> SimConfig {
        SimConfig {
            dt_record: self
                .dt_record
                .unwrap_or_else(|| params.forcing_period() / 100.0),
            substeps: self.substeps,
            n_transient: self.n_transient,
            n_samples: self.n_samples,
            q0: self.q0,
            v0: self.v0,
        }
    }
}

/// Reservoir hyperparameters shared by all sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReservoirSettings {
    pub alpha: f64,
    pub input_fraction: f64,
    pub ridge_lambda: f64,
    pub washout: usize,
    pub spectral_target: f64,
}

impl Default for ReservoirSettings {
    fn default() -> Self {
        let p = ReservoirParams::default();
        Self {
            alpha: p.alpha,
            input_fraction: p.input_fraction,
            ridge_lambda: p.ridge_lambda,
            washout: p.washout,
            spectral_target: p.spectral_target,
        }
    }
}

impl ReservoirSettings {
    fn params(&self, n_nodes: usize) -> ReservoirParams {
        ReservoirParams {
            n_nodes,
            n_inputs: 3,
            alpha: self.alpha,
            input_fraction: self.input_fraction,
            ridge_lambda: self.ridge_lambda,
            washout: self.washout,
            spectral_target: self.spectral_target,
        }
    }
}

/// Full sweep description: which dataset, variants, sizes and replicate
/// count, plus the shared reservoir and simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Duffing parameter set (1, 2 or 3).
    pub dataset: u8,
    pub sizes: Vec<usize>,
    pub n_replicates: usize,
    /// Master seed; every replicate derives its own stream from it.
    pub seed: u64,
    pub variants: Vec<Variant>,
    pub mode: EvalMode,
    /// Edge probability of the plain ER baseline.
    pub er_density: f64,
    pub train_fraction: f64,
    pub section_mode: SectionMode,
    pub reservoir: ReservoirSettings,
    pub sim: SimSettings,
    /// Diagnostic hook: replaces the trained readout with zeros, so the
    /// recorded MAE equals the mean absolute test target.
    pub zero_readout: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: 1,
            sizes: vec![50, 100, 200, 300, 400, 500],
            n_replicates: 100,
            seed: 0,
            variants: Variant::ALL.to_vec(),
            mode: EvalMode::Closed,
            er_density: 0.1,
            train_fraction: 0.8,
            section_mode: SectionMode::Evenly,
            reservoir: ReservoirSettings::default(),
            sim: SimSettings::default(),
            zero_readout: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(1..=3).contains(&self.dataset) {
            return Err(ExperimentError::InvalidConfig(format!(
                "dataset must be 1, 2 or 3, got {}",
                self.dataset
            )));
        }
        if self.sizes.is_empty() {
            return Err(ExperimentError::InvalidConfig("no sizes given".into()));
        }
        if self.sizes.iter().any(|&n| n < 2) {
            return Err(ExperimentError::InvalidConfig(
                "reservoir sizes must be >= 2".into(),
            ));
        }
        let mut seen_sizes = self.sizes.clone();
        seen_sizes.sort_unstable();
        seen_sizes.dedup();
        if seen_sizes.len() != self.sizes.len() {
            return Err(ExperimentError::InvalidConfig(
                "duplicate reservoir sizes".into(),
            ));
        }
        if self.n_replicates == 0 {
            return Err(ExperimentError::InvalidConfig(
                "need at least 1 replicate".into(),
            ));
        }
        if self.variants.is_empty() {
            return Err(ExperimentError::InvalidConfig("no variants given".into()));
        }
        let mut seen = self.variants.clone();
        seen.sort_by_key(Variant::stream_tag);
        seen.dedup();
        if seen.len() != self.variants.len() {
            return Err(ExperimentError::InvalidConfig("duplicate variants".into()));
        }
        if !(self.er_density.is_finite() && (0.0..=1.0).contains(&self.er_density)) {
            return Err(ExperimentError::InvalidConfig(format!(
                "er_density must be in [0, 1], got {}",
                self.er_density
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        self.reservoir
            .params(2)
            .validate()
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    /// Total number of records a sweep will produce.
    pub fn sweep_size(&self) -> usize {
        self.variants.len() * self.sizes.len() * self.n_replicates
    }
}

/// Outcome status of one replicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }

    fn tag(&self) -> String {
        match self {
            RunStatus::Ok => "ok".into(),
            RunStatus::Failed(reason) => format!("failed:{reason}"),
        }
    }

    fn parse_tag(s: &str) -> Result<Self, ExperimentError> {
        if s == "ok" {
            Ok(RunStatus::Ok)
        } else if let Some(reason) = s.strip_prefix("failed:") {
            Ok(RunStatus::Failed(reason.to_string()))
        } else {
            Err(ExperimentError::Parse(format!("bad status '{s}'")))
        }
    }
}

/// One (variant, size, replicate) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub variant: Variant,
    pub dataset: u8,
    pub n_nodes: usize,
    pub replicate: usize,
    /// Derived RNG stream for this replicate (combine with the master seed
    /// to reproduce it in isolation).
    pub seed: u64,
    pub mode: EvalMode,
    pub status: RunStatus,
    /// Prediction error; absent on failed replicates.
    pub mae: Option<f64>,
    /// Network metrics of the reservoir; absent when construction failed.
    pub metrics: Option<NetworkMetrics>,
    /// Edge probability used to generate random variants; for DenseER this
    /// equals the paired stride-1 visibility graph's density exactly.
    pub gen_probability: Option<f64>,
    /// Measured wall time of the replicate in milliseconds. Excluded from
    /// deterministic output unless timing export is requested.
    pub wall_ms: f64,
}

/// Prepared sweep inputs: validated config plus the train/test split the
/// replicates share read-only.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: ExperimentConfig,
    pub train: TimeSeries,
    pub test: TimeSeries,
}

impl RunContext {
    /// Simulates the configured dataset and splits it.
    pub fn prepare(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let params = DuffingParams::preset(config.dataset)
            .ok_or_else(|| ExperimentError::InvalidConfig("unknown dataset".into()))?;
        let sim = config.sim.resolve(&params);
        let series = integrate(&params, &sim)?;
        Self::with_series(config, series)
    }

    /// Uses an existing trajectory (for instance a cached one) instead of
    /// re-simulating.
    pub fn with_series(config: ExperimentConfig, series: TimeSeries) -> Result<Self, ExperimentError> {
        config.validate()?;
        let (train, test) = split(&series, config.train_fraction)?;
        // The readout regression consumes train.len() − 1 columns.
        if config.reservoir.washout + 1 >= train.len() {
            return Err(ExperimentError::InvalidConfig(format!(
                "washout {} leaves no training columns ({} training samples)",
                config.reservoir.washout,
                train.len()
            )));
        }
        Ok(Self { config, train, test })
    }
}

/// RNG stream for one replicate: variant tag, size and replicate index
/// packed into disjoint bit ranges.
fn replicate_stream(variant: Variant, n: usize, replicate: usize) -> u64 {
    (variant.stream_tag() << 56)
        | (((n as u64) & 0x00FF_FFFF) << 32)
        | ((replicate as u64) & 0xFFFF_FFFF)
}

/// RNG stream for random section starts; variant-independent (tag 0) so
/// DenseER reproduces exactly the sections DyRC_VG uses.
fn section_stream(stride: usize, n: usize) -> u64 {
    (((stride as u64) & 0x00FF_FFFF) << 32) | ((n as u64) & 0xFFFF_FFFF)
}

fn seeded_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

fn section_for_replicate(
    ctx: &RunContext,
    n: usize,
    stride: usize,
    replicate: usize,
) -> Result<Section, GraphError> {
    let train_len = ctx.train.len();
    let n_sections = ctx.config.n_replicates;
    let sections = match ctx.config.section_mode {
        SectionMode::Evenly => sample_sections(train_len, n, stride, n_sections)?,
        SectionMode::Random => {
            let mut rng = seeded_rng(ctx.config.seed, section_stream(stride, n));
            sample_sections_random(train_len, n, stride, n_sections, &mut rng)?
        }
    };
    Ok(sections[replicate])
}

fn vg_for_replicate(
    ctx: &RunContext,
    n: usize,
    stride: usize,
    replicate: usize,
) -> Result<WeightedDigraph, GraphError> {
    let section = section_for_replicate(ctx, n, stride, replicate)?;
    let values: Vec<f64> = section.indices().map(|i| ctx.train.q[i]).collect();
    let times: Vec<f64> = section.indices().map(|i| ctx.train.t[i]).collect();
    visibility_graph(&values, &times)
}

/// Builds the reservoir graph for one replicate of a variant, scales it to
/// the spectral target and computes its metrics.
///
/// Returns the scaled graph, the metrics (density, degrees, clustering and
/// betweenness depend only on the edge support, so they equal the
/// unscaled graph's values; `nu` is recomputed after scaling) and the
/// generation probability for the random variants.
pub fn build_reservoir(
    ctx: &RunContext,
    variant: Variant,
    n: usize,
    replicate: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(WeightedDigraph, NetworkMetrics, Option<f64>), GraphError> {
    let (graph, gen_probability) = match variant {
        Variant::Er => {
            let p = ctx.config.er_density;
            (erdos_renyi(n, p, rng)?, Some(p))
        }
        Variant::DenseEr => {
            let paired_vg = vg_for_replicate(ctx, n, 1, replicate)?;
            let p = paired_vg.density();
            (erdos_renyi(n, p, rng)?, Some(p))
        }
        Variant::DyrcVg => (vg_for_replicate(ctx, n, 1, replicate)?, None),
        Variant::DyrcVg16 => (vg_for_replicate(ctx, n, 16, replicate)?, None),
    };
    let scaled = scale_to_spectral_radius(&graph, ctx.config.reservoir.spectral_target)?;
    let m = metrics(&scaled);
    Ok((scaled, m, gen_probability))
}

/// Training inputs/targets: column `j` holds
/// `x = [q(t_j), q̇(t_j), g(t_{j+1})]` and `y = [q(t_{j+1}), q̇(t_{j+1})]`,
/// so a series of T samples yields T−1 usable columns.
fn training_io(ts: &TimeSeries) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = ts.len() - 1;
    let inputs = DMatrix::from_fn(3, t, |row, j| match row {
        0 => ts.q[j],
        1 => ts.qdot[j],
        _ => ts.g[j + 1],
    });
    let targets = DMatrix::from_fn(2, t, |row, j| match row {
        0 => ts.q[j + 1],
        _ => ts.qdot[j + 1],
    });
    (inputs, targets)
}

/// Teacher-forced test inputs: the first column carries the last training
/// state, later columns the true previous test state.
fn open_loop_test_io(train: &TimeSeries, test: &TimeSeries) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = test.len();
    let last = train.len() - 1;
    let inputs = DMatrix::from_fn(3, t, |row, j| match (row, j) {
        (0, 0) => train.q[last],
        (1, 0) => train.qdot[last],
        (0, _) => test.q[j - 1],
        (1, _) => test.qdot[j - 1],
        _ => test.g[j],
    });
    (inputs, test_targets(test))
}

fn test_targets(test: &TimeSeries) -> DMatrix<f64> {
    DMatrix::from_fn(2, test.len(), |row, j| match row {
        0 => test.q[j],
        _ => test.qdot[j],
    })
}

fn graph_fail_reason(e: &GraphError) -> String {
    match e {
        GraphError::SectionTooLong { .. } => "section_too_long".into(),
        GraphError::ZeroSpectralRadius => "zero_spectral_radius".into(),
        GraphError::NoConvergence { .. } => "no_convergence".into(),
        _ => "graph_error".into(),
    }
}

fn reservoir_fail_reason(e: &ReservoirError) -> String {
    match e {
        ReservoirError::NonFinite { .. } => "diverged".into(),
        ReservoirError::SingularSystem { .. } => "singular_system".into(),
        _ => "reservoir_error".into(),
    }
}

fn pipeline(
    ctx: &RunContext,
    variant: Variant,
    n: usize,
    replicate: usize,
    stream: u64,
    record: &mut RunRecord,
) -> Result<f64, String> {
    let cfg = &ctx.config;
    let params = cfg.reservoir.params(n);
    params.validate().map_err(|e| e.to_string())?;

    let mut rng = seeded_rng(cfg.seed, stream);
    let (graph, m, gen_probability) = build_reservoir(ctx, variant, n, replicate, &mut rng)
        .map_err(|e| graph_fail_reason(&e))?;
    record.metrics = Some(m);
    record.gen_probability = gen_probability;

    let w_in = build_input_layer(n, params.n_inputs, params.input_fraction, &mut rng)
        .map_err(|e| reservoir_fail_reason(&e))?;
    let mut model = ReservoirModel::new(
        graph.weights().clone(),
        w_in,
        params.alpha,
        params.spectral_target,
        stream,
    )
    .map_err(|e| reservoir_fail_reason(&e))?;

    let (inputs, targets) = training_io(&ctx.train);
    let states = evolve(&model, &inputs, &DVector::zeros(n)).map_err(|e| reservoir_fail_reason(&e))?;
    let mut w_out = train_readout(&states, &targets, params.ridge_lambda, params.washout)
        .map_err(|e| reservoir_fail_reason(&e))?;
    if cfg.zero_readout {
        w_out.fill(0.0);
    }
    model.set_readout(w_out).map_err(|e| reservoir_fail_reason(&e))?;

    let (y_hat, y_ref) = match cfg.mode {
        EvalMode::Closed => {
            let last = ctx.train.len() - 1;
            let y_init = [ctx.train.q[last], ctx.train.qdot[last]];
            let y_hat = predict_closed_loop(&model, &ctx.test.g, &y_init)
                .map_err(|e| reservoir_fail_reason(&e))?;
            (y_hat, test_targets(&ctx.test))
        }
        EvalMode::Open => {
            let (test_inputs, y_ref) = open_loop_test_io(&ctx.train, &ctx.test);
            let y_hat =
                predict_open_loop(&model, &test_inputs).map_err(|e| reservoir_fail_reason(&e))?;
            (y_hat, y_ref)
        }
    };
    if y_hat.iter().any(|v| !v.is_finite()) {
        return Err("diverged".into());
    }
    mae(&y_hat, &y_ref).map_err(|e| reservoir_fail_reason(&e))
}

/// Runs one replicate end to end. Failures are captured in the record's
/// status; the function itself never panics on numerical trouble.
pub fn run_replicate(ctx: &RunContext, variant: Variant, n: usize, replicate: usize) -> RunRecord {
    let started = Instant::now();
    let stream = replicate_stream(variant, n, replicate);
    let mut record = RunRecord {
        variant,
        dataset: ctx.config.dataset,
        n_nodes: n,
        replicate,
        seed: stream,
        mode: ctx.config.mode,
        status: RunStatus::Ok,
        mae: None,
        metrics: None,
        gen_probability: None,
        wall_ms: 0.0,
    };
    match pipeline(ctx, variant, n, replicate, stream, &mut record) {
        Ok(value) => record.mae = Some(value),
        Err(reason) => {
            log::debug!("{variant} N={n} replicate {replicate} failed: {reason}");
            record.status = RunStatus::Failed(reason);
        }
    }
    record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    record
}

fn task_list(config: &ExperimentConfig) -> Vec<(Variant, usize, usize)> {
    let mut tasks = Vec::with_capacity(config.sweep_size());
    for &variant in &config.variants {
        for &n in &config.sizes {
            for replicate in 0..config.n_replicates {
                tasks.push((variant, n, replicate));
            }
        }
    }
    tasks
}

struct Progress {
    done: AtomicUsize,
    total: usize,
    chunk: usize,
}

impl Progress {
    fn new(total: usize) -> Self {
        Self {
            done: AtomicUsize::new(0),
            total,
            chunk: (total / 20).max(1),
        }
    }

    fn bump(&self) {
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        if done % self.chunk == 0 || done == self.total {
            log::info!("completed {done}/{} replicates", self.total);
        }
    }
}

/// Sequential sweep over the full (variant, size, replicate) grid in
/// canonical order.
pub fn run_sweep_seq(ctx: &RunContext) -> Vec<RunRecord> {
    let tasks = task_list(&ctx.config);
    let progress = Progress::new(tasks.len());
    tasks
        .into_iter()
        .map(|(variant, n, replicate)| {
            let record = run_replicate(ctx, variant, n, replicate);
            progress.bump();
            record
        })
        .collect()
}

/// Rayon-parallel sweep; the indexed collect keeps the canonical record
/// order whatever the execution order was.
#[cfg(feature = "parallel")]
pub fn run_sweep_par(ctx: &RunContext) -> Vec<RunRecord> {
    let tasks = task_list(&ctx.config);
    let progress = Progress::new(tasks.len());
    tasks
        .into_par_iter()
        .map(|(variant, n, replicate)| {
            let record = run_replicate(ctx, variant, n, replicate);
            progress.bump();
            record
        })
        .collect()
}

/// Runs the sweep with the default backend: rayon when the `parallel`
/// feature is enabled, sequential otherwise.
pub fn run_sweep(ctx: &RunContext) -> Vec<RunRecord> {
    #[cfg(feature = "parallel")]
    {
        run_sweep_par(ctx)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sweep_seq(ctx)
    }
}

/// Runs the sweep on a dedicated thread pool of the given size
/// (0 = library default). Without the `parallel` feature the sweep is
/// sequential and `threads` is ignored.
pub fn run_sweep_with_threads(
    ctx: &RunContext,
    threads: usize,
) -> Result<Vec<RunRecord>, ExperimentError> {
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            return Ok(run_sweep_par(ctx));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| ExperimentError::InvalidConfig(format!("thread pool: {e}")))?;
        Ok(pool.install(|| run_sweep_par(ctx)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(run_sweep_seq(ctx))
    }
}

/// Prepared experiment results: all records in canonical order plus the
/// per-cell summary.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryCell>,
}

/// Full experiment: simulate, split, sweep, summarize.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let ctx = RunContext::prepare(config.clone())?;
    let records = run_sweep(&ctx);
    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary })
}

/// Box-plot statistics of the ok-record MAEs in one (variant, N) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaeStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCell {
    pub variant: Variant,
    pub n_nodes: usize,
    pub count_ok: usize,
    pub count_failed: usize,
    /// Absent when the cell has no ok records.
    pub stats: Option<MaeStats>,
}

/// Quantile by linear interpolation between closest ranks; the median of
/// an even-length sample is the midpoint of the two central values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Groups records by (variant, N) in first-appearance order and computes
/// box-plot statistics over the ok records of each cell. Cells without a
/// single ok record are reported with empty statistics.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryCell> {
    let mut order: Vec<(Variant, usize)> = Vec::new();
    let mut maes: HashMap<(Variant, usize), Vec<f64>> = HashMap::new();
    let mut failures: HashMap<(Variant, usize), usize> = HashMap::new();

    for record in records {
        let key = (record.variant, record.n_nodes);
        if !maes.contains_key(&key) {
            order.push(key);
            maes.insert(key, Vec::new());
            failures.insert(key, 0);
        }
        match (&record.status, record.mae) {
            (RunStatus::Ok, Some(value)) => maes.get_mut(&key).unwrap().push(value),
            _ => *failures.get_mut(&key).unwrap() += 1,
        }
    }

    order
        .into_iter()
        .map(|key| {
            let mut values = maes.remove(&key).unwrap();
            let count_failed = failures[&key];
            let count_ok = values.len();
            let stats = if values.is_empty() {
                log::warn!(
                    "cell {} N={} has no ok records",
                    key.0,
                    key.1
                );
                None
            } else {
                values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mean = values.iter().sum::<f64>() / count_ok as f64;
                let std = if count_ok < 2 {
                    0.0
                } else {
                    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                    (ss / (count_ok - 1) as f64).sqrt()
                };
                Some(MaeStats {
                    median: quantile(&values, 0.5),
                    q1: quantile(&values, 0.25),
                    q3: quantile(&values, 0.75),
                    mean,
                    std,
                    min: values[0],
                    max: values[count_ok - 1],
                })
            };
            SummaryCell {
                variant: key.0,
                n_nodes: key.1,
                count_ok,
                count_failed,
                stats,
            }
        })
        .collect()
}

// ── Result tables ────────────────────────────────────────────────────

pub const RESULTS_HEADER: &str =
    "variant,dataset,N,replicate,seed,mode,status,mae,nu,rho,k_in,k_out,clustering,betweenness,wall_ms";

pub const SUMMARY_HEADER: &str =
    "variant,N,count_ok,count_failed,mae_median,mae_q1,mae_q3,mae_mean,mae_std,mae_min,mae_max";

fn opt_g17(v: Option<f64>) -> String {
    v.map(g17).unwrap_or_default()
}

/// Writes the results table. `timing` controls whether measured wall times
/// are exported; without it the wall_ms column is 0 for every row so the
/// file is byte-reproducible across runs and thread counts.
pub fn write_results_csv<W: Write>(
    w: &mut W,
    records: &[RunRecord],
    timing: bool,
) -> Result<(), ExperimentError> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in records {
        let m = r.metrics.as_ref();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.variant.tag(),
            r.dataset,
            r.n_nodes,
            r.replicate,
            r.seed,
            r.mode.tag(),
            r.status.tag(),
            opt_g17(r.mae),
            opt_g17(m.map(|m| m.nu)),
            opt_g17(m.map(|m| m.rho)),
            opt_g17(m.map(|m| m.k_in)),
            opt_g17(m.map(|m| m.k_out)),
            opt_g17(m.map(|m| m.clustering)),
            opt_g17(m.map(|m| m.betweenness)),
            if timing { g17(r.wall_ms) } else { "0".into() },
        )?;
    }
    Ok(())
}

fn parse_opt_f64(s: &str, what: &str) -> Result<Option<f64>, ExperimentError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| ExperimentError::Parse(format!("bad {what} '{s}': {e}")))
}

/// Reads a results table written by [`write_results_csv`]. The generation
/// probability is not part of the table and comes back as `None`.
pub fn read_results_csv<R: BufRead>(r: R) -> Result<Vec<RunRecord>, ExperimentError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| ExperimentError::Parse("empty results file".into()))??;
    if header.trim() != RESULTS_HEADER {
        return Err(ExperimentError::Parse(format!(
            "unexpected results header '{header}'"
        )));
    }
    let mut records = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(ExperimentError::Parse(format!(
                "row {row}: expected 15 fields, got {}",
                fields.len()
            )));
        }
        let variant = Variant::parse_tag(fields[0])
            .ok_or_else(|| ExperimentError::Parse(format!("row {row}: bad variant '{}'", fields[0])))?;
        let parse_int = |s: &str, what: &str| -> Result<u64, ExperimentError> {
            s.parse::<u64>()
                .map_err(|e| ExperimentError::Parse(format!("row {row}: bad {what} '{s}': {e}")))
        };
        let mode = EvalMode::parse_tag(fields[5])
            .ok_or_else(|| ExperimentError::Parse(format!("row {row}: bad mode '{}'", fields[5])))?;
        let status = RunStatus::parse_tag(fields[6])?;
        let nu = parse_opt_f64(fields[8], "nu")?;
        let rho = parse_opt_f64(fields[9], "rho")?;
        let k_in = parse_opt_f64(fields[10], "k_in")?;
        let k_out = parse_opt_f64(fields[11], "k_out")?;
        let clustering = parse_opt_f64(fields[12], "clustering")?;
        let betweenness = parse_opt_f64(fields[13], "betweenness")?;
        let metrics = match (nu, rho, k_in, k_out, clustering, betweenness) {
            (Some(nu), Some(rho), Some(k_in), Some(k_out), Some(clustering), Some(betweenness)) => {
                Some(NetworkMetrics {
                    nu,
                    rho,
                    k_in,
                    k_out,
                    clustering,
                    betweenness,
                })
            }
            _ => None,
        };
        records.push(RunRecord {
            variant,
            dataset: parse_int(fields[1], "dataset")? as u8,
            n_nodes: parse_int(fields[2], "N")? as usize,
            replicate: parse_int(fields[3], "replicate")? as usize,
            seed: parse_int(fields[4], "seed")?,
            mode,
            status,
            mae: parse_opt_f64(fields[7], "mae")?,
            metrics,
            gen_probability: None,
            wall_ms: parse_opt_f64(fields[14], "wall_ms")?.unwrap_or(0.0),
        });
    }
    Ok(records)
}

/// Writes the per-cell summary table.
pub fn write_summary_csv<W: Write>(
    w: &mut W,
    summary: &[SummaryCell],
) -> Result<(), ExperimentError> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for cell in summary {
        let s = cell.stats.as_ref();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            cell.variant.tag(),
            cell.n_nodes,
            cell.count_ok,
            cell.count_failed,
            opt_g17(s.map(|s| s.median)),
            opt_g17(s.map(|s| s.q1)),
            opt_g17(s.map(|s| s.q3)),
            opt_g17(s.map(|s| s.mean)),
            opt_g17(s.map(|s| s.std)),
            opt_g17(s.map(|s| s.min)),
            opt_g17(s.map(|s| s.max)),
        )?;
    }
    Ok(())
}

/// Long-format table for error-versus-size plots: one row per ok record.
pub fn write_mae_vs_size_csv<W: Write>(
    w: &mut W,
    records: &[RunRecord],
) -> Result<(), ExperimentError> {
    writeln!(w, "variant,N,replicate,mae")?;
    for r in records {
        if let (RunStatus::Ok, Some(value)) = (&r.status, r.mae) {
            writeln!(w, "{},{},{},{}", r.variant.tag(), r.n_nodes, r.replicate, g17(value))?;
        }
    }
    Ok(())
}

/// Long-format table for error-versus-metric plots: six rows (one per
/// network metric) for every ok record.
pub fn write_mae_vs_metric_csv<W: Write>(
    w: &mut W,
    records: &[RunRecord],
) -> Result<(), ExperimentError> {
    writeln!(w, "variant,N,replicate,metric,value,mae")?;
    for r in records {
        let (RunStatus::Ok, Some(value), Some(m)) = (&r.status, r.mae, r.metrics.as_ref()) else {
            continue;
        };
        for (name, metric) in [
            ("nu", m.nu),
            ("rho", m.rho),
            ("k_in", m.k_in),
            ("k_out", m.k_out),
            ("clustering", m.clustering),
            ("betweenness", m.betweenness),
        ] {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.variant.tag(),
                r.n_nodes,
                r.replicate,
                name,
                g17(metric),
                g17(value)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            sizes: vec![20],
            n_replicates: 2,
            variants: vec![Variant::Er, Variant::DyrcVg],
            sim: SimSettings {
                n_samples: 700,
                n_transient: 100,
                ..SimSettings::default()
            },
            reservoir: ReservoirSettings {
                washout: 20,
                ..ReservoirSettings::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn stream_ids_are_disjoint() {
        let a = replicate_stream(Variant::Er, 100, 5);
        let b = replicate_stream(Variant::DenseEr, 100, 5);
        let c = replicate_stream(Variant::Er, 101, 5);
        let d = replicate_stream(Variant::Er, 100, 6);
        let e = section_stream(1, 100);
        let all = [a, b, c, d, e];
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
    }

    #[test]
    fn config_validation_catches_errors() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset = 4;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.sizes = vec![50, 50];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.variants = vec![Variant::Er, Variant::Er];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.n_replicates = 0;
        assert!(cfg.validate().is_err());

        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn single_cell_sweep_produces_one_record() {
        let cfg = ExperimentConfig {
            sizes: vec![20],
            n_replicates: 1,
            variants: vec![Variant::Er],
            ..small_config()
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.summary.len(), 1);
        assert!(out.records[0].status.is_ok());
    }

    #[test]
    fn replicates_are_bit_identical_on_repeat() {
        let ctx = RunContext::prepare(small_config()).unwrap();
        let a = run_replicate(&ctx, Variant::DyrcVg, 20, 1);
        let b = run_replicate(&ctx, Variant::DyrcVg, 20, 1);
        assert_eq!(a.mae, b.mae);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.status, b.status);
    }

    #[test]
    fn zero_readout_mae_is_mean_abs_target() {
        let mut cfg = small_config();
        cfg.zero_readout = true;
        cfg.variants = vec![Variant::Er];
        cfg.n_replicates = 1;
        let ctx = RunContext::prepare(cfg).unwrap();
        let record = run_replicate(&ctx, Variant::Er, 20, 0);
        let expected = {
            let y = test_targets(&ctx.test);
            y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64
        };
        approx::assert_relative_eq!(record.mae.unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn summarize_matches_naive_median() {
        let values = [0.3, 0.1, 0.4, 0.2];
        let records: Vec<RunRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| RunRecord {
                variant: Variant::Er,
                dataset: 1,
                n_nodes: 10,
                replicate: i,
                seed: i as u64,
                mode: EvalMode::Closed,
                status: RunStatus::Ok,
                mae: Some(v),
                metrics: None,
                gen_probability: None,
                wall_ms: 0.0,
            })
            .collect();
        let summary = summarize(&records);
        assert_eq!(summary.len(), 1);
        let stats = summary[0].stats.unwrap();
        assert_eq!(stats.median, 0.25);
        assert_eq!(stats.min, 0.1);
        assert_eq!(stats.max, 0.4);
    }

    #[test]
    fn summarize_reports_empty_cells() {
        let record = RunRecord {
            variant: Variant::Er,
            dataset: 1,
            n_nodes: 10,
            replicate: 0,
            seed: 0,
            mode: EvalMode::Closed,
            status: RunStatus::Failed("section_too_long".into()),
            mae: None,
            metrics: None,
            gen_probability: None,
            wall_ms: 0.0,
        };
        let summary = summarize(&[record]);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].count_ok, 0);
        assert_eq!(summary[0].count_failed, 1);
        assert!(summary[0].stats.is_none());
    }

    #[test]
    fn quantile_conventions() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile(&[5.0], 0.5), 5.0);
    }

    #[test]
    fn results_csv_round_trip() {
        let cfg = small_config();
        let out = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &out.records, false).unwrap();
        let back = read_results_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), out.records.len());
        for (a, b) in out.records.iter().zip(back.iter()) {
            assert_eq!(a.variant, b.variant);
            assert_eq!(a.mae, b.mae);
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(a.status, b.status);
            assert_eq!(a.seed, b.seed);
        }
    }

    #[test]
    fn infeasible_sections_become_failed_records() {
        // Stride-16 sections of 20 points need 305 samples; the training
        // split below has fewer, so every DyRC_VG_16 replicate must fail
        // while the sweep itself completes.
        let cfg = ExperimentConfig {
            sizes: vec![20],
            n_replicates: 2,
            variants: vec![Variant::DyrcVg16],
            sim: SimSettings {
                n_samples: 470,
                n_transient: 100,
                ..SimSettings::default()
            },
            reservoir: ReservoirSettings {
                washout: 20,
                ..ReservoirSettings::default()
            },
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 2);
        for r in &out.records {
            assert_eq!(r.status, RunStatus::Failed("section_too_long".into()));
            assert!(r.mae.is_none());
        }
    }
}
