use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use forgecut::circuit::generate::random_circuit;
use forgecut::circuit::{parse_circuit, CutPlan, Observable, Party};
use forgecut::distrib::{spawn_loopback, Coordinator, WorkerConfig};
use forgecut::forging::forge_bell;
use forgecut::mitigation::mitigate_cut_exact;
use forgecut::sampler::run_sampled;
use forgecut::wirecut::ExactCut;

const BELL: &str = include_str!("../../../circuits/bell.json");

fn forging(c: &mut Criterion) {
    c.bench_function("forge_bell reconstruct", |b| {
        b.iter(|| black_box(forge_bell()).reconstruct().unwrap())
    });
}

fn exact_cut(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact cut");
    for gates in [1usize, 2] {
        let circuit = random_circuit(2, 2, gates, 3).unwrap();
        let plan = CutPlan::alice_side(&circuit);
        group.bench_with_input(BenchmarkId::from_parameter(gates), &gates, |b, _| {
            b.iter(|| ExactCut::run(&circuit, &plan).unwrap().state().unwrap())
        });
    }
    group.finish();
}

fn sampled(c: &mut Criterion) {
    let circuit = parse_circuit(BELL).unwrap();
    let obs = Observable::parse("ZZ").unwrap();
    let mut group = c.benchmark_group("sampled");
    group.sample_size(10);
    group.bench_function("bell 10k shots", |b| {
        b.iter(|| run_sampled(&circuit, &obs, 10_000, 1).unwrap().report.mean)
    });
    group.finish();
}

fn mitigation(c: &mut Criterion) {
    let circuit = parse_circuit(BELL).unwrap();
    let plan = CutPlan::alice_side(&circuit);
    let obs = Observable::parse("ZZ").unwrap();
    c.bench_function("mitigate exact", |b| {
        b.iter(|| {
            mitigate_cut_exact(&circuit, &plan, &obs, 0.05)
                .unwrap()
                .mitigated
        })
    });
}

fn distributed(c: &mut Criterion) {
    let circuit = parse_circuit(BELL).unwrap();
    let plan = CutPlan::alice_side(&circuit);
    let obs = Observable::parse("ZZ").unwrap();
    let mut group = c.benchmark_group("distributed");
    group.sample_size(20);
    group.bench_function("loopback exact", |b| {
        b.iter(|| {
            let (a, bob, threads) = spawn_loopback(
                WorkerConfig::new(Party::Alice),
                WorkerConfig::new(Party::Bob),
            );
            let v = Coordinator::new(a, bob, 1)
                .exact(&circuit, &plan, &obs, 1)
                .unwrap();
            threads.join();
            v
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    forging,
    exact_cut,
    sampled,
    mitigation,
    distributed
);
criterion_main!(benches);
