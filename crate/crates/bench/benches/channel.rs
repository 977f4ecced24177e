use criterion::{criterion_group, criterion_main, Criterion};
use plc_core::channel::ChannelParams;
use std::hint::black_box;

fn trace(c: &mut Criterion) {
    let p = ChannelParams::derive(0.2, 0.5, 0.0, 0.5).unwrap();
    c.bench_function("trace_100k", |b| b.iter(|| p.generate_trace(black_box(100_000), 3).unwrap()));
}

criterion_group!(benches, trace);
criterion_main!(benches);
