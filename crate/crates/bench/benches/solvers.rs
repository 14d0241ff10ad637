use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ebpe_bench::fixture;
use ebpe_core::linops::ImplicitSolver;
use ebpe_core::timestep::Stepper;
use std::hint::black_box;

const SIZES: [usize; 3] = [8, 16, 32];

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("transform3");
    for n in SIZES {
        let (grid, state, _) = fixture(n);
        g.bench_with_input(BenchmarkId::new("round_trip", n), &n, |b, _| {
            b.iter(|| {
                let s = grid.to_spectral3(black_box(&state.temp)).unwrap();
                black_box(grid.to_physical3_unchecked(&s))
            })
        });
    }
    g.finish();
}

fn coupled_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("coupled_solve");
    for n in SIZES {
        let (grid, state, _) = fixture(n);
        let solver = ImplicitSolver::coupled(&grid, 1e-3).unwrap();
        let rhs = grid.to_spectral3(&state.temp).unwrap();
        g.bench_with_input(BenchmarkId::new("cached_factor", n), &n, |b, _| {
            b.iter(|| {
                let mut x = rhs.clone();
                solver.solve(black_box(&mut x));
                x
            })
        });
        g.bench_with_input(BenchmarkId::new("factor_and_solve", n), &n, |b, _| {
            b.iter(|| {
                let s = ImplicitSolver::coupled(&grid, black_box(1e-3)).unwrap();
                let mut x = rhs.clone();
                s.solve(&mut x);
                x
            })
        });
    }
    g.finish();
}

fn imex_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("imex_step");
    g.sample_size(20);
    for n in SIZES {
        let (grid, state, params) = fixture(n);
        let mut stepper = Stepper::new(&grid, params, 1e-3).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| stepper.step(black_box(&state)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, transforms, coupled_solve, imex_step);
criterion_main!(benches);
