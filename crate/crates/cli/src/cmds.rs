//! Subcommand implementations.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dyrc_core::dynamics::{integrate, DuffingParams, DynamicsError, SimConfig, TimeSeries};
use dyrc_core::experiment::{
    read_results_csv, run_sweep_with_threads, summarize, write_mae_vs_metric_csv,
    write_mae_vs_size_csv, write_results_csv, write_summary_csv, EvalMode, ExperimentConfig,
    ExperimentError, RunContext, RunRecord, SectionMode, SummaryCell, Variant,
};
use dyrc_core::graphs::{metrics, sample_sections, visibility_graph, GraphError, WeightedDigraph};

use crate::files::write_atomic;
use crate::{ExportArgs, Failure, MetricsArgs, RunArgs, SimulateArgs, VgArgs};

/// Global flags shared by all subcommands.
pub struct Common {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub parallel: Option<usize>,
    pub config: Option<PathBuf>,
}

/// Config file contents: experiment fields at the top level plus harness
/// settings (paths, parallelism, timing export).
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    out: Option<PathBuf>,
    parallel: Option<usize>,
    timing: Option<bool>,
    dataset_cache: Option<PathBuf>,
    #[serde(flatten)]
    experiment: ExperimentConfig,
}

fn load_file_config(path: &Path) -> Result<FileConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|ext| ext == "json");
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("bad JSON config {}: {e}", path.display())))
    } else {
        toml::from_str(&text)
            .map_err(|e| Failure::config(format!("bad TOML config {}: {e}", path.display())))
    }
}

struct Resolved {
    experiment: ExperimentConfig,
    out: PathBuf,
    parallel: usize,
    timing: bool,
    dataset_cache: Option<PathBuf>,
}

/// Defaults <- config file <- command-line flags.
fn resolve(common: &Common, args: Option<&RunArgs>) -> Result<Resolved, Failure> {
    let file = match &common.config {
        Some(path) => load_file_config(path)?,
        None => FileConfig::default(),
    };
    let mut experiment = file.experiment;
    if let Some(seed) = common.seed {
        experiment.seed = seed;
    }
    let mut timing = file.timing.unwrap_or(false);
    let mut dataset_cache = file.dataset_cache;
    if let Some(args) = args {
        if let Some(set) = args.set {
            experiment.dataset = set;
        }
        if let Some(sizes) = &args.sizes {
            experiment.sizes = sizes.clone();
        }
        if let Some(replicates) = args.replicates {
            experiment.n_replicates = replicates;
        }
        if let Some(tags) = &args.variants {
            let mut variants = Vec::new();
            for tag in tags {
                let v = Variant::parse_tag(tag).ok_or_else(|| {
                    Failure::config(format!(
                        "unknown variant '{tag}' (expected ER, DenseER, DyRC_VG or DyRC_VG_16)"
                    ))
                })?;
                variants.push(v);
            }
            experiment.variants = variants;
        }
        if let Some(mode) = &args.mode {
            experiment.mode = EvalMode::parse_tag(mode)
                .ok_or_else(|| Failure::config(format!("mode must be open or closed, got '{mode}'")))?;
        }
        if let Some(sections) = &args.sections {
            experiment.section_mode = match sections.as_str() {
                "evenly" => SectionMode::Evenly,
                "random" => SectionMode::Random,
                other => {
                    return Err(Failure::config(format!(
                        "sections must be evenly or random, got '{other}'"
                    )))
                }
            };
        }
        if let Some(fraction) = args.train_fraction {
            experiment.train_fraction = fraction;
        }
        if args.timing {
            timing = true;
        }
        if let Some(cache) = &args.dataset_cache {
            dataset_cache = Some(cache.clone());
        }
    }
    let out = common
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("dyrc_out"));
    let parallel = common.parallel.or(file.parallel).unwrap_or(0);
    Ok(Resolved {
        experiment,
        out,
        parallel,
        timing,
        dataset_cache,
    })
}

fn dynamics_failure(e: DynamicsError) -> Failure {
    match e {
        DynamicsError::NonFinite { .. } => Failure::divergence(e.to_string()),
        DynamicsError::InvalidConfig(_) | DynamicsError::TooShort { .. } => {
            Failure::config(e.to_string())
        }
        DynamicsError::Parse(_) | DynamicsError::Io(_) => Failure::data(e.to_string()),
    }
}

fn experiment_failure(e: ExperimentError) -> Failure {
    match e {
        ExperimentError::InvalidConfig(_) => Failure::config(e.to_string()),
        ExperimentError::Dynamics(inner) => dynamics_failure(inner),
        ExperimentError::Parse(_) | ExperimentError::Io(_) => Failure::data(e.to_string()),
    }
}

// ── simulate ─────────────────────────────────────────────────────────

#[derive(Serialize)]
struct SimulateSidecar<'a> {
    set: u8,
    params: &'a DuffingParams,
    sim: &'a SimConfig,
    train_fraction_hint: f64,
    rows: usize,
    version: &'static str,
}

fn apply_force_overrides(params: &mut DuffingParams, overrides: &[String]) -> Result<(), Failure> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("--force needs KEY=VALUE, got '{item}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| Failure::config(format!("bad value in --force {item}: {e}")))?;
        match key.trim() {
            "d" => params.damping = value,
            "k" => params.stiffness = value,
            "k_nl" => params.stiffness_cubic = value,
            "F" => params.forcing_amplitude = value,
            "Omega" => params.forcing_frequency = value,
            other => {
                return Err(Failure::config(format!(
                    "unknown parameter '{other}' (expected d, k, k_nl, F or Omega)"
                )))
            }
        }
    }
    Ok(())
}

pub fn simulate(common: &Common, args: &SimulateArgs) -> Result<(), Failure> {
    let resolved = resolve(common, None)?;
    let mut params = DuffingParams::preset(args.set)
        .ok_or_else(|| Failure::config(format!("unknown parameter set {}", args.set)))?;
    apply_force_overrides(&mut params, &args.force)?;
    params.validate().map_err(dynamics_failure)?;

    let mut sim = resolved.experiment.sim.resolve(&params);
    if let Some(dt) = args.dt {
        sim.dt_record = dt;
    }
    if let Some(substeps) = args.substeps {
        sim.substeps = substeps;
    }
    if let Some(samples) = args.samples {
        sim.n_samples = samples;
    }
    if let Some(transient) = args.transient {
        sim.n_transient = transient;
    }
    if let Some(ic) = &args.ic {
        let (q0, v0) = ic
            .split_once(',')
            .ok_or_else(|| Failure::config(format!("--ic needs 'q0,v0', got '{ic}'")))?;
        sim.q0 = q0
            .trim()
            .parse()
            .map_err(|e| Failure::config(format!("bad q0 '{q0}': {e}")))?;
        sim.v0 = v0
            .trim()
            .parse()
            .map_err(|e| Failure::config(format!("bad v0 '{v0}': {e}")))?;
    }
    sim.validate().map_err(dynamics_failure)?;

    let series = integrate(&params, &sim).map_err(dynamics_failure)?;

    let mut csv = Vec::new();
    series
        .write_csv(&mut csv)
        .map_err(|e| Failure::data(e.to_string()))?;
    let csv_path = resolved.out.join(format!("duffing_set{}.csv", args.set));
    write_atomic(&csv_path, &csv).map_err(|e| Failure::data(e.to_string()))?;

    let sidecar = SimulateSidecar {
        set: args.set,
        params: &params,
        sim: &sim,
        train_fraction_hint: resolved.experiment.train_fraction,
        rows: series.len(),
        version: env!("CARGO_PKG_VERSION"),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Failure::data(format!("sidecar serialization: {e}")))?;
    let json_path = resolved.out.join(format!("duffing_set{}.json", args.set));
    write_atomic(&json_path, json.as_bytes()).map_err(|e| Failure::data(e.to_string()))?;

    log::info!(
        "wrote {} rows to {} (+ sidecar)",
        series.len(),
        csv_path.display()
    );
    Ok(())
}

// ── vg ───────────────────────────────────────────────────────────────

fn graph_failure(e: GraphError) -> Failure {
    match e {
        GraphError::InvalidArgument(_) => Failure::config(e.to_string()),
        _ => Failure::data(e.to_string()),
    }
}

pub fn vg(common: &Common, args: &VgArgs) -> Result<(), Failure> {
    let resolved = resolve(common, None)?;
    let file = fs::File::open(&args.input)
        .map_err(|e| Failure::data(format!("cannot open {}: {e}", args.input.display())))?;
    let series = TimeSeries::read_csv(BufReader::new(file)).map_err(dynamics_failure)?;

    if args.section_index >= args.sections {
        return Err(Failure::data(format!(
            "section index {} out of range (only {} sections)",
            args.section_index, args.sections
        )));
    }
    let sections = sample_sections(series.len(), args.points, args.stride, args.sections)
        .map_err(graph_failure)?;
    let section = sections[args.section_index];

    let values: Vec<f64> = section.indices().map(|i| series.q[i]).collect();
    let times: Vec<f64> = section.indices().map(|i| series.t[i]).collect();
    let graph = visibility_graph(&values, &times).map_err(graph_failure)?;
    let m = metrics(&graph);

    let mut edges = Vec::new();
    graph
        .write_csv(&mut edges)
        .map_err(|e| Failure::data(e.to_string()))?;
    let edges_path = resolved.out.join("vg_edges.csv");
    write_atomic(&edges_path, &edges).map_err(|e| Failure::data(e.to_string()))?;

    let info = format!(
        "{{\"n\": {}, \"points\": {}, \"stride\": {}, \"sections\": {}, \"section_index\": {}, \"start\": {}, \"span\": {}, \"edges\": {}, \"metrics\": {}}}\n",
        graph.node_count(),
        args.points,
        args.stride,
        args.sections,
        args.section_index,
        section.start,
        section.span(),
        graph.edge_count(),
        m.to_json_12(),
    );
    let metrics_path = resolved.out.join("vg_metrics.json");
    write_atomic(&metrics_path, info.as_bytes()).map_err(|e| Failure::data(e.to_string()))?;

    log::info!(
        "visibility graph: {} nodes, {} edges -> {}",
        graph.node_count(),
        graph.edge_count(),
        edges_path.display()
    );
    Ok(())
}

// ── metrics ──────────────────────────────────────────────────────────

pub fn metrics_cmd(args: &MetricsArgs) -> Result<(), Failure> {
    let file = fs::File::open(&args.input)
        .map_err(|e| Failure::data(format!("cannot open {}: {e}", args.input.display())))?;
    let graph = WeightedDigraph::read_csv(BufReader::new(file)).map_err(graph_failure)?;
    if graph.node_count() < 2 {
        return Err(Failure::data("graph has fewer than 2 nodes"));
    }
    let m = metrics(&graph);
    if m.nu == 0.0 {
        return Err(Failure::data(
            "graph has zero spectral radius (no cycles or no edges)",
        ));
    }
    println!("{}", m.to_json_12());
    Ok(())
}

// ── run ──────────────────────────────────────────────────────────────

fn load_or_simulate_series(
    resolved: &Resolved,
) -> Result<Option<TimeSeries>, Failure> {
    let Some(cache) = &resolved.dataset_cache else {
        return Ok(None);
    };
    if cache.exists() {
        let file = fs::File::open(cache)
            .map_err(|e| Failure::data(format!("cannot open cache {}: {e}", cache.display())))?;
        let series = TimeSeries::read_csv(BufReader::new(file)).map_err(dynamics_failure)?;
        log::info!("loaded {} samples from {}", series.len(), cache.display());
        return Ok(Some(series));
    }
    let params = DuffingParams::preset(resolved.experiment.dataset)
        .ok_or_else(|| Failure::config("unknown dataset".to_string()))?;
    let sim = resolved.experiment.sim.resolve(&params);
    let series = integrate(&params, &sim).map_err(dynamics_failure)?;
    let mut csv = Vec::new();
    series
        .write_csv(&mut csv)
        .map_err(|e| Failure::data(e.to_string()))?;
    write_atomic(cache, &csv).map_err(|e| Failure::data(e.to_string()))?;
    log::info!("cached {} samples to {}", series.len(), cache.display());
    Ok(Some(series))
}

fn write_run_outputs(
    out: &Path,
    records: &[RunRecord],
    summary: &[SummaryCell],
    timing: bool,
) -> Result<(), Failure> {
    let mut results = Vec::new();
    write_results_csv(&mut results, records, timing).map_err(experiment_failure)?;
    write_atomic(&out.join("results.csv"), &results).map_err(|e| Failure::data(e.to_string()))?;

    let mut summary_csv = Vec::new();
    write_summary_csv(&mut summary_csv, summary).map_err(experiment_failure)?;
    write_atomic(&out.join("summary.csv"), &summary_csv)
        .map_err(|e| Failure::data(e.to_string()))?;

    let mut by_size = Vec::new();
    write_mae_vs_size_csv(&mut by_size, records).map_err(experiment_failure)?;
    write_atomic(&out.join("plotdata").join("mae_vs_size.csv"), &by_size)
        .map_err(|e| Failure::data(e.to_string()))?;

    let mut by_metric = Vec::new();
    write_mae_vs_metric_csv(&mut by_metric, records).map_err(experiment_failure)?;
    write_atomic(&out.join("plotdata").join("mae_vs_metric.csv"), &by_metric)
        .map_err(|e| Failure::data(e.to_string()))?;
    Ok(())
}

pub fn run(common: &Common, args: &RunArgs) -> Result<(), Failure> {
    let resolved = resolve(common, Some(args))?;
    resolved.experiment.validate().map_err(experiment_failure)?;

    let ctx = match load_or_simulate_series(&resolved)? {
        Some(series) => RunContext::with_series(resolved.experiment.clone(), series)
            .map_err(experiment_failure)?,
        None => RunContext::prepare(resolved.experiment.clone()).map_err(experiment_failure)?,
    };

    log::info!(
        "sweep: {} variants x {} sizes x {} replicates = {} runs (mode {}, seed {})",
        ctx.config.variants.len(),
        ctx.config.sizes.len(),
        ctx.config.n_replicates,
        ctx.config.sweep_size(),
        ctx.config.mode.tag(),
        ctx.config.seed,
    );
    let records = run_sweep_with_threads(&ctx, resolved.parallel).map_err(experiment_failure)?;
    let summary = summarize(&records);

    let failed = records.iter().filter(|r| !r.status.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed}/{} replicates failed (see results.csv)", records.len());
    }

    write_run_outputs(&resolved.out, &records, &summary, resolved.timing)?;
    log::info!("wrote results to {}", resolved.out.display());
    Ok(())
}

// ── export ───────────────────────────────────────────────────────────

pub fn export(common: &Common, args: &ExportArgs) -> Result<(), Failure> {
    let resolved = resolve(common, None)?;
    let file = fs::File::open(&args.results)
        .map_err(|e| Failure::data(format!("cannot open {}: {e}", args.results.display())))?;
    let records = read_results_csv(BufReader::new(file)).map_err(experiment_failure)?;
    let summary = summarize(&records);

    let mut summary_csv = Vec::new();
    write_summary_csv(&mut summary_csv, &summary).map_err(experiment_failure)?;
    write_atomic(&resolved.out.join("summary.csv"), &summary_csv)
        .map_err(|e| Failure::data(e.to_string()))?;

    let mut by_size = Vec::new();
    write_mae_vs_size_csv(&mut by_size, &records).map_err(experiment_failure)?;
    write_atomic(&resolved.out.join("plotdata").join("mae_vs_size.csv"), &by_size)
        .map_err(|e| Failure::data(e.to_string()))?;

    let mut by_metric = Vec::new();
    write_mae_vs_metric_csv(&mut by_metric, &records).map_err(experiment_failure)?;
    write_atomic(
        &resolved.out.join("plotdata").join("mae_vs_metric.csv"),
        &by_metric,
    )
    .map_err(|e| Failure::data(e.to_string()))?;

    log::info!(
        "regenerated summary and plot data for {} records in {}",
        records.len(),
        resolved.out.display()
    );
    Ok(())
}
