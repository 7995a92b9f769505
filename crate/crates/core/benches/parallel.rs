//! Sequential versus rayon execution of the batch workloads: the table
//! validator and a fuzz campaign.

use std::hint::black_box;

use cadt_core::builtin::{register_builtin, Registry};
use cadt_core::harness::{fuzz, FuzzConfig};
use cadt_core::validate::validate_tables;
use cadt_core::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn strategies() -> Vec<(&'static str, Exec)> {
    let all = vec![("sequential", Exec::Sequential)];
    #[cfg(feature = "parallel")]
    let all = [all, vec![("parallel", Exec::Parallel)]].concat();
    all
}

fn bench_validate(c: &mut Criterion) {
    let mut group = c.benchmark_group("validate_tables");
    group.sample_size(10);
    for (adt, bound) in [("stack", 3), ("set", 3), ("real", 1)] {
        let spec = register_builtin(adt).expect("built-in");
        for (name, exec) in strategies() {
            group.bench_with_input(BenchmarkId::new(name, adt), &bound, |b, &bound| {
                b.iter(|| black_box(validate_tables(&spec, bound, exec)))
            });
        }
    }
    group.finish();
}

fn bench_fuzz(c: &mut Criterion) {
    let mut group = c.benchmark_group("fuzz");
    group.sample_size(10);
    let registry = Registry::builtin();
    let config = FuzzConfig {
        runs: 200,
        minimize: false,
        ..FuzzConfig::default()
    };
    for (name, exec) in strategies() {
        group.bench_function(BenchmarkId::new(name, config.runs), |b| {
            b.iter(|| black_box(fuzz(&config, &registry, exec).expect("built-in ADTs")))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_validate, bench_fuzz);
criterion_main!(benches);
