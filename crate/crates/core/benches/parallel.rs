use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use floorsep::cluster::{auto_k, KMeansConfig};
use floorsep::distance::{candidate_pairs, PairingPolicy, PathLossHeuristic};
use floorsep::embed::{generate_walks, EmbeddingMatrix, WalkConfig};
use floorsep::eval::{bootstrap_ci, BootstrapConfig};
use floorsep::exec::rng_for;
use floorsep::pipeline::prepare_with;
use floorsep::pipeline::RunConfig;
use floorsep::synth::{generate, SyntheticBuildingConfig};
use floorsep::Exec;
use rand::Rng;

const MODES: [Exec; 2] = [Exec::Sequential, Exec::Parallel];

fn dataset() -> floorsep::ingest::RawDataset {
    let cfg = SyntheticBuildingConfig { floors: 4, trajectories: 16, steps_per_trajectory: 50, seed: 7, ..Default::default() };
    generate(&cfg).unwrap()
}

fn bench_pairs(c: &mut Criterion) {
    let ds = dataset();
    let heuristic = PathLossHeuristic::default();
    let mut group = c.benchmark_group("candidate_pairs");
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| candidate_pairs(&ds, PairingPolicy::default(), &heuristic, exec))
        });
    }
    group.finish();
}

fn bench_walks(c: &mut Criterion) {
    let prep = prepare_with(&RunConfig::default(), dataset()).unwrap();
    let mut group = c.benchmark_group("walks");
    group.sample_size(10);
    for exec in MODES {
        let cfg = WalkConfig { walks_per_node: 2, walk_length: 40, exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| generate_walks(&prep.graph, cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_auto_k(c: &mut Criterion) {
    let mut rng = rng_for(&[3]);
    let rows: Vec<Vec<f64>> =
        (0..600).map(|i| (0..16).map(|d| ((i % 4) * (d % 3)) as f64 + rng.gen::<f64>()).collect()).collect();
    let x = EmbeddingMatrix::from_rows(&rows).unwrap();
    let mut group = c.benchmark_group("auto_k");
    group.sample_size(10);
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| auto_k(&x, 3, 10, 1, &KMeansConfig::default(), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_bootstrap(c: &mut Criterion) {
    let flags: Vec<bool> = (0..2000).map(|i| (i * 7919) % 11 < 8).collect();
    let mut group = c.benchmark_group("bootstrap");
    for exec in MODES {
        let cfg = BootstrapConfig { resamples: 500, exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| bootstrap_ci(&flags, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_pairs, bench_walks, bench_auto_k, bench_bootstrap);
criterion_main!(benches);
