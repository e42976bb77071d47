//! Benchmarks for the hot paths: hull triangulation, partial-loss table
//! construction, annealer solves, and a full optimizer iteration.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use glam::DVec3;
use sonoshape::acoustics::{build_partial_loss_table, Microphone, Monopole, Scene};
use sonoshape::mesh::{generate_sphere_mesh, triangulate};
use sonoshape::optimizer::{generate_mutations, run_iteration, OptimizerParams};
use sonoshape::qubo::{build_qubo, choose_penalty};
use sonoshape::rng::derived_rng;
use sonoshape::solver::{solve_annealer, AnnealerParams};
use std::hint::black_box;

fn reference_scene() -> Scene {
    Scene {
        monopole: Monopole { position: DVec3::new(2.5, 0.0, 0.0) },
        microphone: Microphone {
            center: DVec3::new(2.0, 0.0, 0.0),
            half_axis_u: DVec3::new(0.0, 2.0, 0.0),
            half_axis_v: DVec3::new(0.0, 0.0, 1.15),
        },
    }
}

fn bench_triangulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("triangulate");
    for n in [26usize, 100, 400] {
        let mut rng = derived_rng(1, &[n as u64]);
        use rand::Rng;
        let points: Vec<DVec3> = (0..n)
            .map(|_| loop {
                let v = DVec3::new(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                );
                if v.length() > 1e-3 && v.length() <= 1.0 {
                    break v / v.length();
                }
            })
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &points, |b, points| {
            b.iter(|| triangulate(black_box(points)).unwrap());
        });
    }
    group.finish();
}

fn bench_loss_table(c: &mut Criterion) {
    let scene = reference_scene();
    let mesh = generate_sphere_mesh(6, 6).unwrap();
    let params = OptimizerParams::default();
    let mut rng = derived_rng(2, &[]);
    let mutations = generate_mutations(&mesh, 1, &params, &mut rng).unwrap();
    c.bench_function("loss_table_48_simplices_k3", |b| {
        b.iter(|| build_partial_loss_table(black_box(&mesh), &mutations, &scene, 50, 7).unwrap());
    });
}

fn bench_annealer(c: &mut Criterion) {
    let scene = reference_scene();
    let mesh = generate_sphere_mesh(6, 6).unwrap();
    let params = OptimizerParams::default();
    let mut rng = derived_rng(3, &[]);
    let mutations = generate_mutations(&mesh, 1, &params, &mut rng).unwrap();
    let table = build_partial_loss_table(&mesh, &mutations, &scene, 50, 7).unwrap();
    let loss_only = build_qubo(&mesh, &table, 1.0, 0.0).unwrap();
    let instance = loss_only.with_penalty(choose_penalty(&loss_only));
    c.bench_function("annealer_78_vars_default_budget", |b| {
        b.iter(|| solve_annealer(black_box(&instance), &AnnealerParams::default(), 11).unwrap());
    });
}

fn bench_iteration(c: &mut Criterion) {
    let scene = reference_scene();
    let mesh = generate_sphere_mesh(6, 6).unwrap();
    let params = OptimizerParams::default();
    c.bench_function("full_iteration_48_simplices", |b| {
        b.iter(|| run_iteration(black_box(&mesh), 1, &params, &scene).unwrap());
    });
}

criterion_group!(benches, bench_triangulate, bench_loss_table, bench_annealer, bench_iteration);
criterion_main!(benches);
