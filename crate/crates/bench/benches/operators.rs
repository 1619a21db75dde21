use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use nscrit_bench::{ladder, slice, smooth, solenoidal};
use nscrit_core::duhamel::{bilinear_b, heat_extension, kt_split};
use nscrit_core::grid::dyadic_partition;
use nscrit_core::norms::{norm_morrey, norm_y2, norm_ykt};
use nscrit_core::solver::picard_solve;
use nscrit_core::spectral::{apply_symbol, heat, leray};
use nscrit_core::{NormConfig, ProblemData, SolveOptions, Symbol};

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for n in [16, 32] {
        let u = slice(3, n, 3, 1);
        let s = slice(3, n, 1, 2);
        group.bench_with_input(BenchmarkId::new("heat", n), &u, |b, u| b.iter(|| heat(black_box(u), 0.1)));
        group.bench_with_input(BenchmarkId::new("leray", n), &u, |b, u| b.iter(|| leray(black_box(u))));
        let sigma = Symbol::leray_divergence(0, 1, 2);
        group.bench_with_input(BenchmarkId::new("apply_symbol", n), &s, |b, s| {
            b.iter(|| apply_symbol(&sigma, black_box(s)))
        });
    }
    group.finish();
}

fn duhamel(c: &mut Criterion) {
    let mut group = c.benchmark_group("duhamel");
    group.sample_size(10);
    for n in [16, 32] {
        let grid = ladder(2, n, 24);
        let u = smooth(&grid, 2, 3);
        group.bench_with_input(BenchmarkId::new("bilinear_b", n), &u, |b, u| b.iter(|| bilinear_b(u, u)));
        let s = smooth(&grid, 1, 4);
        let t = grid.times()[12];
        let x = [grid.space().length / 2.0, grid.space().length / 2.0, 0.0];
        group.bench_with_input(BenchmarkId::new("kt_split", n), &s, |b, s| {
            b.iter(|| kt_split(&Symbol::abs(), s, s, t, x))
        });
        let u0 = solenoidal(&grid, 5);
        group.bench_with_input(BenchmarkId::new("heat_extension", n), &u0, |b, u0| {
            b.iter(|| heat_extension(u0, &grid))
        });
    }
    group.finish();
}

fn norms(c: &mut Criterion) {
    let mut group = c.benchmark_group("norms");
    group.sample_size(10);
    let cfg = NormConfig::default();
    for n in [16, 32] {
        let grid = ladder(2, n, 24);
        let u = smooth(&grid, 1, 6);
        group.bench_with_input(BenchmarkId::new("y2", n), &u, |b, u| b.iter(|| norm_y2(u, &cfg)));
        group.bench_with_input(BenchmarkId::new("ykt", n), &u, |b, u| b.iter(|| norm_ykt(u, &cfg)));
        group.bench_with_input(BenchmarkId::new("morrey_p2", n), &u, |b, u| {
            b.iter(|| norm_morrey(u, 2.0, 4.0, &cfg))
        });
        group.bench_with_input(BenchmarkId::new("dyadic_partition", n), &grid, |b, g| {
            b.iter(|| dyadic_partition(black_box(g)))
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    let grid = ladder(2, 16, 16);
    let data = ProblemData::unforced(grid.clone(), solenoidal(&grid, 7).scaled(0.01)).expect("solenoidal data");
    let opts = SolveOptions {
        c0: Some(1.0),
        ..SolveOptions::default()
    };
    group.bench_function("picard_2d_16", |b| b.iter(|| picard_solve(&data, &opts)));
    group.finish();
}

criterion_group!(benches, spectral, duhamel, norms, solver);
criterion_main!(benches);
