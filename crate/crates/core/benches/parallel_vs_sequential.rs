//! Simulation, price assembly and analysis of a small batch of realizations,
//! once through rayon and once on the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use impactflow::config::RunConfig;
use impactflow::par::Execution;
use impactflow::pipeline::{analyze, simulate_samples};

fn small_config() -> RunConfig {
    RunConfig::from_json(
        r#"{
            "horizon_trades": 100000,
            "n_realizations": 4,
            "t_grid": {"min": 16, "max": 4096, "per_octave": 2},
            "collapse_t": [128, 256, 512]
        }"#,
    )
    .expect("bench config is valid")
}

fn bench(c: &mut Criterion) {
    let cfg = small_config();
    let modes = [
        ("parallel", Execution::Parallel),
        ("sequential", Execution::Sequential),
    ];

    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    for (name, exec) in modes {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate_samples(&cfg, exec).unwrap())
        });
    }
    g.finish();

    let samples = simulate_samples(&cfg, Execution::Parallel).unwrap();
    let mut g = c.benchmark_group("analyze");
    g.sample_size(10);
    for (name, exec) in modes {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| analyze(&cfg, &samples, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
