use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kpath_bench::fat_tree;
use kpath_core::kpaths::enumerate_paths;
use kpath_core::loadmodel::ecmp_loads;
use kpath_core::placement::plan_fixed_k;
use kpath_core::CostKind;

fn enumerate(c: &mut Criterion) {
    let (topo, _) = fat_tree();
    let (s, d) = (topo.endpoints()[0], *topo.endpoints().last().unwrap());
    c.bench_function("enumerate_paths theta=0.25", |b| {
        b.iter(|| enumerate_paths(&topo, black_box(s), black_box(d), 0.25, 1000).unwrap())
    });
    c.bench_function("enumerate_paths theta=inf max=200", |b| {
        b.iter(|| enumerate_paths(&topo, black_box(s), black_box(d), f64::INFINITY, 200).unwrap())
    });
}

fn plan(c: &mut Criterion) {
    let (topo, m) = fat_tree();
    let mut g = c.benchmark_group("plan_fixed_k");
    g.sample_size(10);
    for k in [1, 4] {
        g.bench_function(format!("k={k}"), |b| {
            b.iter(|| plan_fixed_k(&topo, &m, k, 0.25, CostKind::MaxUtil, 1).unwrap())
        });
    }
    g.finish();
}

fn ecmp(c: &mut Criterion) {
    let (topo, m) = fat_tree();
    c.bench_function("ecmp_loads", |b| b.iter(|| ecmp_loads(&topo, black_box(&m)).unwrap()));
}

criterion_group!(benches, enumerate, plan, ecmp);
criterion_main!(benches);
