use criterion::{criterion_group, criterion_main, Criterion};

use eqlog_bench::{chain_program, fixture};
use eqlog_core::analysis::{build_needs_graph, has_cycle};
use eqlog_core::corpus::{FIB_PROGRAM, TREE_DP_PROGRAM};
use eqlog_core::tabling::{normalize_tabled, EngineOptions};
use eqlog_core::{normalize_untabled, parse_program};

fn bench_fib(c: &mut Criterion) {
    let (p, goal) = fixture(FIB_PROGRAM, "fib(12)");
    let mut group = c.benchmark_group("fib_12");
    group.bench_function("tabled", |b| {
        b.iter(|| normalize_tabled(&p, &goal, EngineOptions::default()).unwrap())
    });
    group.bench_function("untabled", |b| {
        b.iter(|| normalize_untabled(&p, &goal, 10_000_000).unwrap())
    });
    group.finish();
}

fn bench_tree_dp(c: &mut Criterion) {
    let (p, goal) = fixture(TREE_DP_PROGRAM, "sum(build(8))");
    let mut group = c.benchmark_group("tree_dp_8");
    group.bench_function("tabled", |b| {
        b.iter(|| normalize_tabled(&p, &goal, EngineOptions::default()).unwrap())
    });
    group.bench_function("untabled", |b| {
        b.iter(|| normalize_untabled(&p, &goal, 10_000_000).unwrap())
    });
    group.finish();
}

fn bench_toggles(c: &mut Criterion) {
    let (p, goal) = fixture(TREE_DP_PROGRAM, "sum(build(10))");
    let mut group = c.benchmark_group("tabled_toggles");
    let plain = EngineOptions {
        dont_reduce: false,
        never_add: false,
        prune_rules: false,
        ..EngineOptions::default()
    };
    group.bench_function("all_on", |b| {
        b.iter(|| normalize_tabled(&p, &goal, EngineOptions::default()).unwrap())
    });
    group.bench_function("all_off", |b| {
        b.iter(|| normalize_tabled(&p, &goal, plain).unwrap())
    });
    group.finish();
}

fn bench_analysis(c: &mut Criterion) {
    let src = chain_program(5_000);
    let program = parse_program(&src).unwrap();
    c.bench_function("needs_graph_5000_rules", |b| {
        b.iter(|| {
            let g = build_needs_graph(&program);
            has_cycle(&g)
        })
    });
}

criterion_group!(
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_fib, bench_tree_dp, bench_toggles, bench_analysis
);
criterion_main!(benches);
