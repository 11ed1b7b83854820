use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mbo_core::geometry::seed_partition;
use mbo_core::mbo;
use mbo_core::{Backend, DensitySpec, DiscreteGeometry, ExecMode, HeatKernelOperator, SchemeConfig, ShapeSpec};

fn operator(side: usize, backend: Backend, density: &DensitySpec, mode: ExecMode) -> HeatKernelOperator {
    let geom = Arc::new(DiscreteGeometry::torus_grid(side, 2, density).unwrap());
    HeatKernelOperator::build(geom, backend, 1e-10).unwrap().with_exec_mode(mode)
}

fn three_phase_field(op: &HeatKernelOperator) -> mbo_core::PhaseField {
    let shapes = [
        ShapeSpec::Disk { center: vec![0.3, 0.5], radius: 0.15, phase: 1 },
        ShapeSpec::Disk { center: vec![0.7, 0.5], radius: 0.2, phase: 2 },
    ];
    seed_partition(op.geometry(), &shapes, 3).unwrap()
}

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_phases");
    group.sample_size(20);
    let bump = DensitySpec::GaussianBump { center: vec![0.5, 0.5], amplitude: 2.0, width: 0.2 };
    for (label, side, backend, density) in [
        ("fourier_256", 256, Backend::Fourier, DensitySpec::Uniform),
        ("expm_action_128_bump", 128, Backend::ExpmAction, bump),
    ] {
        for mode in [ExecMode::Sequential, ExecMode::Parallel] {
            let op = operator(side, backend, &density, mode);
            let u = three_phase_field(&op);
            let h = (4.0 / side as f64).powi(2);
            group.bench_with_input(BenchmarkId::new(label, format!("{mode:?}")), &u, |b, u| {
                b.iter(|| op.apply_phases(h, u).unwrap())
            });
        }
    }
    group.finish();
}

fn scheme_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("mbo_step");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        let op = operator(256, Backend::Fourier, &DensitySpec::Uniform, mode);
        let u = three_phase_field(&op);
        let cfg = SchemeConfig::new((4.0f64 / 256.0).powi(2), 5);
        group.bench_function(BenchmarkId::new("fourier_256_5_steps", format!("{mode:?}")), |b| {
            b.iter(|| mbo::run(&op, u.clone(), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, apply, scheme_step);
criterion_main!(benches);
