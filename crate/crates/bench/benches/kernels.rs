use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use csplab_core::clause::{fourier_transform, not_all_equal};
use csplab_core::ensemble::{builtin, Builtin};
use csplab_core::graph::{sample_instance, solve_exhaustive};
use csplab_core::thresholds::phi_sup;
use csplab_core::tree::{broadcast, reconstruction_samples, root_bias, sample_tree};

fn transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("fourier_transform");
    for k in [4usize, 10, 16] {
        let f = not_all_equal(k, 0b1011 & ((1 << k) - 1)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &f, |b, f| b.iter(|| fourier_transform(black_box(f))));
    }
    group.finish();
}

fn tree(c: &mut Criterion) {
    let d = builtin(Builtin::Hyp2col, 3).unwrap();
    let t = sample_tree(&d, 1.0, 5, 1).unwrap();
    let leaves = broadcast(&t, 1, 1).unwrap().leaf_slice;
    c.bench_function("root_bias/hyp2col3_depth5", |b| b.iter(|| root_bias(black_box(&t), black_box(&leaves))));

    let x = builtin(Builtin::Xor, 4).unwrap();
    c.bench_function("reconstruction_samples/xor4_depth6_x1000", |b| {
        b.iter(|| reconstruction_samples(&x, 0.9, 6, 1000, black_box(3)))
    });
}

fn instances(c: &mut Criterion) {
    let d = builtin(Builtin::Hyp2col, 3).unwrap();
    let mut group = c.benchmark_group("solve_exhaustive");
    for n in [12usize, 18] {
        let inst = sample_instance(&d, n, 0.5, 7).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| b.iter(|| solve_exhaustive(inst)));
    }
    group.finish();
}

fn second_moment(c: &mut Criterion) {
    let d = builtin(Builtin::Nae, 6).unwrap();
    c.bench_function("phi_sup/nae6_grid1000", |b| b.iter(|| phi_sup(&d, black_box(8.0), 0.02, 1000)));
}

criterion_group!(benches, transform, tree, instances, second_moment);
criterion_main!(benches);
