use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use p2pmac_core::mac::{compile_policy, emit_rules};
use p2pmac_core::synth::synthetic_policy;

fn compile(c: &mut Criterion) {
    let mut group = c.benchmark_group("compile_policy");
    for n in [10, 20, 40, 80, 160, 320, 640] {
        let policy = synthetic_policy(n, 2, 1);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &policy, |b, p| b.iter(|| compile_policy(p)));
    }
    group.finish();

    let compiled = compile_policy(&synthetic_policy(640, 2, 1));
    c.bench_function("emit_rules/640", |b| b.iter(|| emit_rules(&compiled)));
}

criterion_group!(benches, compile);
criterion_main!(benches);
