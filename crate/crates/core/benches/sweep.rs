//! Benchmarks: parallel vs sequential replicate sweep, and visibility-graph
//! construction across reservoir sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dyrc_core::dynamics::{integrate, DuffingParams, SimConfig};
use dyrc_core::experiment::{
    run_sweep_seq, ExperimentConfig, ReservoirSettings, RunContext, SimSettings, Variant,
};
use dyrc_core::graphs::visibility_graph;

fn bench_config() -> ExperimentConfig {
    ExperimentConfig {
        sizes: vec![50],
        n_replicates: 8,
        variants: vec![Variant::Er, Variant::DyrcVg16],
        sim: SimSettings {
            n_samples: 2600,
            n_transient: 100,
            ..SimSettings::default()
        },
        reservoir: ReservoirSettings {
            washout: 50,
            ..ReservoirSettings::default()
        },
        ..ExperimentConfig::default()
    }
}

fn sweep_backends(c: &mut Criterion) {
    let ctx = RunContext::prepare(bench_config()).unwrap();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| run_sweep_seq(&ctx)));
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| dyrc_core::experiment::run_sweep_par(&ctx))
    });
    group.finish();
}

fn visibility_sizes(c: &mut Criterion) {
    let params = DuffingParams::preset(1).unwrap();
    let cfg = SimConfig {
        n_samples: 1200,
        n_transient: 200,
        ..SimConfig::for_params(&params)
    };
    let ts = integrate(&params, &cfg).unwrap();
    let mut group = c.benchmark_group("visibility_graph");
    for n in [100usize, 250, 500] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| visibility_graph(&ts.q[..n], &ts.t[..n]).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_backends, visibility_sizes);
criterion_main!(benches);
