use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use p2pmac_core::simnet::{generate_population, PopulationParams};
use p2pmac_core::run_scenario;

fn negotiation(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_scenario");
    for requesters in [1, 4, 16] {
        let params = PopulationParams {
            honest: requesters,
            blind_liars: requesters,
            informed_liars: requesters,
            log_forgers: requesters,
            ..PopulationParams::default()
        };
        let scenario = generate_population(&params, 7);
        group.bench_with_input(BenchmarkId::new("requesters_per_behavior", requesters), &scenario, |b, s| {
            b.iter(|| run_scenario(s).expect("generated scenarios are valid"))
        });
    }
    group.finish();
}

criterion_group!(benches, negotiation);
criterion_main!(benches);
