//! Sample-level kernels on one worker and on all workers. Build with
//! `--no-default-features` to time the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dflab::certify::CollarData;
use dflab::geometry::{boundary_sample, SampleCounts};
use dflab::levi::levi_map;
use dflab::monge_ampere::f_interior;
use dflab::{par, DomainSpec};

fn egg() -> DomainSpec {
    DomainSpec::new(2, "abs2(z1) + abs2(z2)^2 - 1", vec![[-1.1, 1.1]; 4])
        .unwrap()
        .with_samples(SampleCounts {
            volume: 50_000,
            ..SampleCounts::default()
        })
}

fn thread_counts() -> Vec<usize> {
    let all = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if all > 1 {
        vec![1, all]
    } else {
        vec![1]
    }
}

fn kernels(c: &mut Criterion) {
    let spec = egg();
    let boundary = boundary_sample(&spec, 500).unwrap().points;
    let mut group = c.benchmark_group(if cfg!(feature = "parallel") { "rayon" } else { "sequential" });
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_with_input(BenchmarkId::new("levi_map", threads), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || levi_map(&spec, &boundary).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("collar_certify", threads), &threads, |b, &t| {
            b.iter(|| {
                par::with_threads(t, || {
                    CollarData::sample(&spec, 0.01, 0.1, 2000)
                        .unwrap()
                        .certify_exponent(0.9)
                        .unwrap()
                })
            })
        });
        group.bench_with_input(BenchmarkId::new("ma_volume", threads), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || f_interior(&spec, 1.0, 0.02, None).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
