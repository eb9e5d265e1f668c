// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Phase sweeps on one thread versus the rayon pool.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nvphase::experiments::{parse_config, run_experiment};
use nvphase::par::Execution;

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);
    for (name, sets) in [
        ("mw2opt", vec!["sweep.mw2opt.phases=24".to_string()]),
        ("opt2mw", vec!["sweep.opt2mw.delay_points=4".to_string()]),
    ] {
        let base = parse_config("{}", &sets).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut cfg = base.clone();
            cfg.execution = exec;
            group.bench_with_input(BenchmarkId::new(name, format!("{exec:?}")), &cfg, |b, cfg| {
                b.iter(|| black_box(run_experiment(name, cfg).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
