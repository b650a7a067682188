//! Benchmarks for the hot kernels: the interval sieve, rational
//! approximation, cube roots in cube-permitting residue rings, and the
//! minimum-cubes table.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_bigint::BigInt;

use sevencubes::construct::{cube_root_mod, min_cubes_table};
use sevencubes::criterion::best_rational;
use sevencubes::rational::{big, frac, rat};
use sevencubes::sieve::bad_set;
use sevencubes_bench::desk_family;

fn bench_sieve(c: &mut Criterion) {
    let family = desk_family();
    let hi = big(family.period());
    let mut group = c.benchmark_group("sieve");
    group.sample_size(10);
    group.bench_function("bad_set_period_515955", |b| {
        b.iter(|| bad_set(black_box(&family), &rat(0), &hi).unwrap())
    });
    group.finish();
}

fn bench_best_rational(c: &mut Criterion) {
    // A Fibonacci ratio resists rational approximation longest, so this
    // is the worst case for the continued-fraction walk.
    let x = frac(514229, 832040);
    let qmax = BigInt::from(1_000_000u32);
    c.bench_function("best_rational_fibonacci", |b| {
        b.iter(|| best_rational(black_box(&x), black_box(&qmax)).unwrap())
    });
}

fn bench_cube_root(c: &mut Criterion) {
    let m = BigInt::from(2805u32);
    let n = BigInt::from(123_456_789_012_345_678u64);
    c.bench_function("cube_root_mod_2805", |b| {
        b.iter(|| cube_root_mod(black_box(&n), black_box(&m)).unwrap())
    });
}

fn bench_min_cubes(c: &mut Criterion) {
    c.bench_function("min_cubes_table_10k", |b| {
        b.iter(|| min_cubes_table(black_box(10_000)))
    });
}

criterion_group!(
    kernels,
    bench_sieve,
    bench_best_rational,
    bench_cube_root,
    bench_min_cubes
);
criterion_main!(kernels);
