use bilarx_bench::{fixture_matrix, fixture_operator};
use bilarx_core::baseline::fit_piecewise_constant;
use bilarx_core::prox::{row_group_shrink, svt, thin_svd};
use bilarx_core::rip_constant;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn svd_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("thin_svd");
    for rows in [30, 120, 480] {
        let m = fixture_matrix(rows, 3, 1);
        group.bench_with_input(BenchmarkId::from_parameter(rows), &m, |b, m| b.iter(|| thin_svd(black_box(m))));
    }
    group.finish();

    let m = fixture_matrix(120, 3, 2);
    c.bench_function("svt_120x3", |b| b.iter(|| svt(black_box(&m), 0.5)));
    c.bench_function("row_group_shrink_120x3", |b| b.iter(|| row_group_shrink(black_box(&m), 0.5)));
}

fn rip(c: &mut Criterion) {
    let mut group = c.benchmark_group("rip_constant");
    for k in [1, 2, 3] {
        let op = fixture_operator(24, 12, 2, 3);
        group.bench_with_input(BenchmarkId::new("k", k), &k, |b, &k| b.iter(|| rip_constant(&op, k, 1_000_000)));
    }
    group.finish();
}

fn segmentation(c: &mut Criterion) {
    let y: Vec<f64> = fixture_matrix(200, 1, 4).iter().copied().collect();
    c.bench_function("fit_piecewise_constant_200_k4", |b| b.iter(|| fit_piecewise_constant(black_box(&y), 4)));
}

criterion_group!(benches, svd_kernels, rip, segmentation);
criterion_main!(benches);
