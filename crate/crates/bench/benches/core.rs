use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vibratree_bench::{comb, free_vibration, spectra, tree};
use vibratree_core::appearance::build_connectivity;
use vibratree_core::inference::{gibbs_cluster, LocalGraph};
use vibratree_core::simulator::{step_with, DynamicsSolver, Integrator};
use vibratree_core::spectral::{default_epsilon, extract_features, frequency_response, spectral_envelope};
use vibratree_core::synth::random_initial_state;
use vibratree_core::{infer_tree, linearize, modal_analysis, InferenceParams};

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for levels in [2, 3, 4] {
        let t = tree(levels, 3);
        let state = random_initial_state(t.model.len(), 0.01, 2);
        for solver in [DynamicsSolver::Assembled, DynamicsSolver::Recursive] {
            let id = BenchmarkId::new(format!("{solver:?}"), t.model.len());
            group.bench_with_input(id, &state, |b, s| {
                b.iter(|| step_with(&t.model, black_box(s), 1e-4, Integrator::ExplicitEuler, solver).unwrap())
            });
        }
    }
    group.finish();
}

fn modal(c: &mut Criterion) {
    let mut group = c.benchmark_group("modal");
    for levels in [3, 4, 5] {
        let t = tree(levels, 3);
        group.bench_with_input(BenchmarkId::from_parameter(t.model.len()), &t, |b, t| {
            b.iter(|| modal_analysis(&linearize(black_box(&t.model)).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let t = tree(3, 5);
    let traj = free_vibration(&t, 4096);
    let specs = spectra(&traj);
    c.bench_function("spectra/7 nodes x 4096", |b| b.iter(|| spectra(black_box(&traj))));
    let root = &specs[0];
    let eps = default_epsilon(root);
    c.bench_function("response+envelope+features", |b| {
        b.iter(|| {
            let r = frequency_response(black_box(&specs[3]), root, eps).unwrap();
            let modes = spectral_envelope(&r, 3).unwrap();
            extract_features(&r, &modes.mode_bins()).unwrap()
        })
    });
}

fn gibbs(c: &mut Criterion) {
    let t = tree(3, 5);
    let specs = spectra(&free_vibration(&t, 1024));
    let root = &specs[0];
    let eps = default_epsilon(root);
    let responses: Vec<_> = specs[1..].iter().map(|s| frequency_response(s, root, eps).unwrap()).collect();
    let bins = spectral_envelope(&responses[0], 3).unwrap().mode_bins();
    let features: Vec<_> = responses.iter().map(|r| extract_features(r, &bins).unwrap()).collect();
    let graph = LocalGraph::empty(features.len());
    let params = InferenceParams { restarts: 1, ..Default::default() };
    c.bench_function("gibbs/6 nodes", |b| b.iter(|| gibbs_cluster(black_box(&features), &graph, &params).unwrap()));

    let big = tree(6, 17);
    let traj = free_vibration(&big, 1024);
    let big_specs = spectra(&traj);
    let params = InferenceParams::default();
    let mut group = c.benchmark_group("infer");
    group.sample_size(10);
    group.bench_function(format!("{} nodes", big.model.len()), |b| {
        b.iter(|| infer_tree(black_box(&big_specs), None, &big.positions, 0, &params).unwrap())
    });
    group.finish();
}

fn connectivity(c: &mut Criterion) {
    let mut group = c.benchmark_group("connectivity");
    group.sample_size(20);
    for size in [64, 128] {
        let (map, points) = comb(size, 6);
        group.bench_with_input(BenchmarkId::from_parameter(size), &(map, points), |b, (m, p)| {
            b.iter(|| build_connectivity(black_box(m), p).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, step, modal, spectral, gibbs, connectivity);
criterion_main!(benches);
