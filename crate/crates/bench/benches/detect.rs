use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nnmimo_bench::detection_fixture;
use nnmimo_core::detectors::{ml_noncoherent_generic, PairwiseMlDetector};

fn detectors(c: &mut Criterion) {
    let mut group = c.benchmark_group("ml_detect");
    for antennas in [50, 100, 400] {
        let f = detection_fixture(3, antennas);
        let detector = PairwiseMlDetector::new(&f.codebook, &f.profile);
        group.bench_with_input(BenchmarkId::new("pairwise", antennas), &f, |b, f| {
            b.iter(|| detector.detect(black_box(&f.y1), black_box(&f.y2)))
        });
        group.bench_with_input(BenchmarkId::new("generic", antennas), &f, |b, f| {
            b.iter(|| ml_noncoherent_generic(black_box(&f.y), &f.candidates, &f.profile).unwrap())
        });
    }
    group.finish();
}

fn precompute(c: &mut Criterion) {
    let f = detection_fixture(3, 100);
    c.bench_function("pairwise_detector_new_k3", |b| {
        b.iter(|| PairwiseMlDetector::new(black_box(&f.codebook), &f.profile))
    });
}

criterion_group!(benches, detectors, precompute);
criterion_main!(benches);
