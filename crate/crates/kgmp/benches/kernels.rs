//! Parallel vs sequential timings of the hot kernels: quadrature reductions,
//! sparse matrix-vector products, and a full electrostatic solve.
//!
//! The two paths are algorithmically identical (fixed chunking, ordered
//! combination), so this suite measures pure scheduling overhead/speedup.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kgmp::grid::{assemble_phi_operator, build_grid, ScalarField};
use kgmp::kernels;
use kgmp::linsolve::spd_solve;
use kgmp::model::PhysParams;
use kgmp::reduction::solve_phi;
use std::hint::black_box;

fn bench_dot(c: &mut Criterion) {
    let mut group = c.benchmark_group("dot");
    for n in [1 << 14, 1 << 18] {
        let a: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).cos()).collect();
        let b: Vec<f64> = (0..n).map(|k| (k as f64 * 0.11).sin()).collect();
        group.bench_with_input(BenchmarkId::new("seq", n), &n, |bch, _| {
            bch.iter(|| kernels::dot_seq(black_box(&a), black_box(&b)))
        });
        group.bench_with_input(BenchmarkId::new("par", n), &n, |bch, _| {
            bch.iter(|| kernels::dot_par(black_box(&a), black_box(&b)))
        });
    }
    group.finish();
}

fn bench_matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("matvec");
    for (nr, nz) in [(64usize, 128usize), (128, 256)] {
        let g = build_grid(nr, nz, 8.0, 8.0).unwrap();
        let p = PhysParams::new(1.0, 0.5, 0.5, 1, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, |r, z| r * (-(r * r) - z * z).exp());
        let op = assemble_phi_operator(&g, &p, &u).unwrap();
        let x: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.01).sin()).collect();
        let mut y = vec![0.0; g.len()];
        let id = format!("{nr}x{nz}");
        group.bench_with_input(BenchmarkId::new("par", &id), &id, |bch, _| {
            bch.iter(|| op.matvec(black_box(&x), black_box(&mut y)))
        });
        group.bench_with_input(BenchmarkId::new("seq", &id), &id, |bch, _| {
            bch.iter(|| {
                kernels::fill_indexed_seq(black_box(&mut y), |row| {
                    let (cols, vals) = op.row(row);
                    let mut acc = 0.0;
                    for (c, v) in cols.iter().zip(vals) {
                        acc += v * x[*c as usize];
                    }
                    acc
                })
            })
        });
    }
    group.finish();
}

fn bench_phi_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("phi_solve");
    group.sample_size(10);
    let g = build_grid(64, 128, 8.0, 8.0).unwrap();
    let p = PhysParams::new(1.0, 0.5, 0.5, 1, 1.0).unwrap();
    let u = ScalarField::from_fn(&g, |r, z| r * (-(r * r) - z * z).exp());
    group.bench_function("64x128", |bch| bch.iter(|| solve_phi(&g, &p, black_box(&u)).unwrap()));
    group.finish();
}

fn bench_cg_kernel_mix(c: &mut Criterion) {
    // End-to-end CG on the gauge operator: exercises matvec + dot + axpy.
    let mut group = c.benchmark_group("gauge_cg");
    group.sample_size(10);
    let g = build_grid(96, 192, 8.0, 8.0).unwrap();
    let p = PhysParams::new(1.0, 0.5, 0.5, 1, 1.0).unwrap();
    let u = ScalarField::from_fn(&g, |r, z| r * (-(r * r) - z * z).exp());
    let op = kgmp::grid::assemble_gauge_operator(&g, &p, &u).unwrap();
    let b: Vec<f64> = (0..g.len()).map(|k| ((k % 97) as f64 * 0.02).sin()).collect();
    group.bench_function("96x192", |bch| {
        bch.iter(|| spd_solve(&op, black_box(&b), 1e-8, 10 * g.len()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_dot, bench_matvec, bench_phi_solve, bench_cg_kernel_mix);
criterion_main!(benches);
