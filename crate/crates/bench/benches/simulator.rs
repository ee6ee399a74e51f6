// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

use coop_sdn_bench::{fig3_scenario, random_packets, random_table, sample_messages};
use coop_sdn_core::{Simulation, WireMessage};

fn full_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    for packets in [20u32, 200] {
        let scenario = fig3_scenario(packets);
        group.bench_with_input(BenchmarkId::new("fig3", packets), &scenario, |b, s| {
            b.iter(|| Simulation::new(s, 0).unwrap().run(0).unwrap())
        });
    }
    group.finish();
}

fn lookup(c: &mut Criterion) {
    let mut group = c.benchmark_group("lookup");
    let packets = random_packets(256, 7);
    for size in [8usize, 64, 512] {
        let table = random_table(size, 3);
        group.bench_with_input(BenchmarkId::from_parameter(size), &table, |b, t| {
            b.iter(|| packets.iter().filter_map(|p| t.lookup(black_box(p))).count())
        });
    }
    group.finish();
}

fn codec(c: &mut Criterion) {
    let messages = sample_messages();
    let encoded: Vec<Vec<u8>> = messages.iter().map(WireMessage::encode).collect();
    c.bench_function("wire/encode", |b| b.iter(|| messages.iter().map(|m| black_box(m).encode().len()).sum::<usize>()));
    c.bench_function("wire/decode", |b| {
        b.iter_batched(
            || encoded.clone(),
            |bufs| bufs.iter().map(|m| WireMessage::decode(m).unwrap()).collect::<Vec<_>>(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, full_run, lookup, codec);
criterion_main!(benches);
