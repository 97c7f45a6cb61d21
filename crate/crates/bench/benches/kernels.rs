use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shearlab_core::bounds::{mean_bound, second_moment_bound};
use shearlab_core::diagnostics::AuditSample;
use shearlab_core::ou::{sample_path, uniform_times, PathInit};
use shearlab_core::solver::{Solver, VelocityField};
use shearlab_core::{FlowConfig, Geometry, GridSpec, InitialCondition, OuParams};

fn flow() -> FlowConfig {
    let g = Geometry::new(2.0, 1.0).unwrap();
    FlowConfig::new(g, 0.02, OuParams::new(1.0, 1.0, 0.25).unwrap()).unwrap()
}

fn spec(n: usize) -> GridSpec {
    GridSpec {
        n1: n,
        n2: n,
        n3: n,
        dt: 0.005,
        cfl_safety: 0.9,
    }
}

fn perturbed(solver: &mut Solver) -> VelocityField {
    let init = InitialCondition::Perturbed {
        speed: 1.0,
        amplitude: 0.1,
        seed: 3,
    };
    solver.init_field(&init, 1.0).unwrap()
}

fn ou_paths(c: &mut Criterion) {
    let p = OuParams::new(1.0, 1.0, 0.5).unwrap();
    let times = uniform_times(1.0, 1e-4).unwrap();
    c.bench_function("ou_exact_path_1e4_steps", |b| {
        b.iter(|| sample_path(&p, black_box(&times), 7, PathInit::Stationary).unwrap())
    });
}

fn closed_forms(c: &mut Criterion) {
    let cfg = flow();
    c.bench_function("mean_and_second_moment_bounds", |b| {
        b.iter(|| {
            let c = black_box(&cfg);
            (mean_bound(c).unwrap(), second_moment_bound(c).unwrap())
        })
    });
    let bp = cfg.background;
    c.bench_function("grad_phi_norm_sq", |b| {
        b.iter(|| bp.grad_phi_norm_sq(black_box(0.8)))
    });
}

fn solver_step(c: &mut Criterion) {
    let cfg = flow();
    let mut group = c.benchmark_group("heun_step");
    group.sample_size(20);
    for n in [16usize, 32] {
        let mut solver = Solver::new(&cfg.geometry, &spec(n), cfg.viscosity).unwrap();
        let start = perturbed(&mut solver);
        let dt = solver.stable_dt(&start, 1.0) * 0.9;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut field = start.clone();
            b.iter(|| solver.step(&mut field, 1.0, dt).unwrap())
        });
    }
    group.finish();
}

fn audit_sample(c: &mut Criterion) {
    let cfg = flow();
    let mut solver = Solver::new(&cfg.geometry, &spec(32), cfg.viscosity).unwrap();
    let field = perturbed(&mut solver);
    c.bench_function("audit_sample_32", |b| {
        b.iter(|| AuditSample::measure(black_box(&field), &cfg.background))
    });
}

criterion_group!(benches, ou_paths, closed_forms, solver_step, audit_sample);
criterion_main!(benches);
