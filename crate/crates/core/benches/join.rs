use std::hint::black_box;
use std::time::Duration;

use april_core::geom::Mbr;
use april_core::par::Execution;
use april_core::pipeline::{build_stores, run_join, FilterKind, JoinConfig, Predicate};
use april_core::ri::Side;
use april_oracle::polygon_dataset;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PATHS: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn workload() -> (april_core::pipeline::Dataset, april_core::pipeline::Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = Mbr::new(0.0, 0.0, 1000.0, 1000.0).unwrap();
    (polygon_dataset(&mut rng, 1000, &m, 3.0, 20.0), polygon_dataset(&mut rng, 1000, &m, 3.0, 20.0))
}

fn build(c: &mut Criterion) {
    let (r, s) = workload();
    let mut g = c.benchmark_group("build_approximations");
    g.sample_size(10).warm_up_time(Duration::from_secs(1));
    for (name, execution) in PATHS {
        for filter in [FilterKind::April, FilterKind::Ri] {
            let cfg = JoinConfig { order: 12, filter, execution, ..Default::default() };
            g.bench_with_input(BenchmarkId::new(name, format!("{filter:?}")), &cfg, |b, cfg| {
                b.iter(|| black_box(build_stores(&[&r, &s], cfg, Side::R).unwrap()))
            });
        }
    }
    g.finish();
}

fn join(c: &mut Criterion) {
    let (r, s) = workload();
    let mut g = c.benchmark_group("run_join");
    g.sample_size(10).warm_up_time(Duration::from_secs(1));
    for (name, execution) in PATHS {
        for filter in [FilterKind::None, FilterKind::April, FilterKind::AprilCompressed, FilterKind::Ri] {
            let cfg = JoinConfig { order: 12, filter, partitions: 2, execution, ..Default::default() };
            g.bench_with_input(BenchmarkId::new(name, format!("{filter:?}")), &cfg, |b, cfg| {
                b.iter(|| black_box(run_join(&r, &s, Predicate::Intersects, cfg).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, build, join);
criterion_main!(benches);
