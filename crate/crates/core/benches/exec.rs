use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lamiflow::diffusion::{assemble_generator, build_kronecker, kronecker_initial, step_implicit, Slope, Variant};
use lamiflow::green_uniformize::{solve_green, Disc};
use lamiflow::heat_kernel::kernel_table;
use lamiflow::{Exec, Tolerances};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn kernel(c: &mut Criterion) {
    let tol = Tolerances::default();
    let rhos: Vec<f64> = (1..=16).map(|k| 0.25 * k as f64).collect();
    let mut g = c.benchmark_group("kernel_table");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| kernel_table(&rhos, &[0.1, 1.0], &tol, e).unwrap())
        });
    }
    g.finish();
}

fn semigroup(c: &mut Criterion) {
    let tol = Tolerances::default();
    let lam = build_kronecker(64, Slope::Irrational(1.618_033_988_749_895)).unwrap();
    let gen = assemble_generator(&lam, Variant::Drifted).unwrap();
    let u = kronecker_initial(&lam).unwrap();
    let mut g = c.benchmark_group("implicit_euler_step");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| step_implicit(&gen, &u, 0.05, &tol, e).unwrap())
        });
    }
    g.finish();
}

fn green(c: &mut Criterion) {
    let tol = Tolerances::default();
    let disc = Disc { center: [0.0, 0.0], radius: 1.0 };
    let mut g = c.benchmark_group("green_solve");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| solve_green(&disc, 1.0 / 64.0, [0.0, 0.0], &tol, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernel, semigroup, green);
criterion_main!(benches);
