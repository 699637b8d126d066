//! Throughput comparison between the data-parallel executor and the
//! sequential fallback on a representative simulation workload.
//!
//! Run with `cargo bench --bench throughput`. When the crate is built
//! without the `parallel` feature both benchmarks exercise the same
//! sequential code path, which is still useful as a regression baseline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use randeq::exec;
use randeq::mc::{FamilySampler, SimulationSpec};
use randeq::pi0::{HypothesisConfig, HypothesisFamily};

fn synthetic_family(k: usize) -> HypothesisFamily {
    let configs: Vec<HypothesisConfig> = (0..k)
        .map(|i| {
            let spread = i as f64 / k as f64;
            HypothesisConfig {
                n: 5_000 + 400 * i as u64,
                theta_true: 0.15 + 0.7 * spread,
                theta1: 0.25,
                theta2: 0.75,
            }
        })
        .collect();
    HypothesisFamily::new(configs).expect("synthetic family is valid")
}

fn family_draws(c: &mut Criterion) {
    let family = synthetic_family(47);
    let sampler = FamilySampler::new(&family).expect("sampler builds");
    let spec = SimulationSpec::new(7, 1 << 16, 0.5, 0.5, 0.05).expect("spec is valid");

    let mut group = c.benchmark_group("family-draws");
    for reps in [64u64, 512] {
        group.bench_with_input(BenchmarkId::new("executor", reps), &reps, |b, &reps| {
            b.iter(|| {
                let drawn = exec::map_indexed(reps as usize, |rep| {
                    sampler.draw(&spec, rep as u64).expect("draw succeeds")
                });
                drawn.len()
            })
        });
        group.bench_with_input(BenchmarkId::new("sequential", reps), &reps, |b, &reps| {
            b.iter(|| {
                let drawn = exec::map_indexed_sequential(reps as usize, |rep| {
                    sampler.draw(&spec, rep as u64).expect("draw succeeds")
                });
                drawn.len()
            })
        });
    }
    group.finish();
}

fn criterion_config() -> Criterion {
    Criterion::default().sample_size(10)
}

criterion_group! {
    name = benches;
    config = criterion_config();
    targets = family_draws
}
criterion_main!(benches);
