use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use effiq_bench::{members, od_points, paired_errors, rows};
use effiq_core::ensemble::aggregate;
use effiq_core::features::fit_kmeans;
use effiq_core::net::{NetworkParams, DEFAULT_HIDDEN};
use effiq_core::stats::{wilcoxon_with, WilcoxonMethod};

const D: usize = 19;

fn network(c: &mut Criterion) {
    let net = NetworkParams::init(D, &DEFAULT_HIDDEN, 7).unwrap();
    let (xs, ys) = rows(500, D);
    c.bench_function("forward_single_row", |b| {
        b.iter(|| net.forward(black_box(&xs[0])).unwrap())
    });
    c.bench_function("backward_batch_500", |b| {
        b.iter(|| net.backward(black_box(&xs), black_box(&ys)))
    });
    c.bench_function("adversarial_backward_batch_500", |b| {
        b.iter(|| net.adversarial_backward(black_box(&xs), black_box(&ys), 0.01))
    });
}

fn ensemble(c: &mut Criterion) {
    let preds = members(10);
    c.bench_function("aggregate_10_members", |b| {
        b.iter(|| aggregate(black_box(&preds)))
    });
}

fn wilcoxon(c: &mut Criterion) {
    let (small_a, small_b) = paired_errors(20);
    let (a, b) = paired_errors(5000);
    c.bench_function("wilcoxon_exact_n20", |bn| {
        bn.iter(|| {
            wilcoxon_with(
                black_box(&small_a),
                black_box(&small_b),
                WilcoxonMethod::Exact,
            )
            .unwrap()
        })
    });
    c.bench_function("wilcoxon_normal_n5000", |bn| {
        bn.iter(|| wilcoxon_with(black_box(&a), black_box(&b), WilcoxonMethod::Normal).unwrap())
    });
}

fn kmeans(c: &mut Criterion) {
    let points = od_points(20_000);
    c.bench_function("kmeans_k8_20000", |b| {
        b.iter_batched(
            || points.clone(),
            |p| fit_kmeans(&p, 8, 42, 100).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, network, ensemble, wilcoxon, kmeans);
criterion_main!(benches);
