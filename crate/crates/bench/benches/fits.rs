use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ebp_bench::training_voxel;
use ebp_core::baselines::{default_tensor_grid, dti_fit, grid_nnls_on};
use ebp_core::kernel::tensor_oracle;
use ebp_core::methods::{fit_voxel, EbpStopping, Method, MethodConfig};
use ebp_core::metrics::{emd, DiscreteFodf};
use ebp_core::simulate::make_directions;
use ebp_core::{transform, OracleConfig, RadialMode, RegularizationSpec, TensorKernel};

fn solvers(c: &mut Criterion) {
    let (scheme, signal) = training_voxel(7);
    let family = TensorKernel::new(scheme.clone(), RadialMode::Zero);
    let problem = transform(signal.clone(), family.clone(), RegularizationSpec::volume_anchor(1.0, 1.0)).unwrap();
    let grid = default_tensor_grid();
    c.bench_function("grid_nnls_724_columns", |b| b.iter(|| grid_nnls_on(black_box(&problem), &grid).unwrap()));
    c.bench_function("tensor_oracle_10_restarts", |b| {
        b.iter(|| tensor_oracle(black_box(&signal), &family, None, OracleConfig::default(), 3).unwrap())
    });
    c.bench_function("dti_fit", |b| b.iter(|| dti_fit(black_box(&scheme), &signal).unwrap()));
}

fn pipelines(c: &mut Criterion) {
    let (scheme, signal) = training_voxel(7);
    let mut group = c.benchmark_group("fit_voxel");
    group.sample_size(10);
    let fixed_c = MethodConfig {
        c: Some(1.0),
        stopping: EbpStopping::Fixed,
        max_iterations: 20,
        ..MethodConfig::default()
    };
    group.bench_function("ebp_fixed_20", |b| {
        b.iter(|| fit_voxel(Method::Ebp, black_box(&scheme), &signal, &fixed_c).unwrap())
    });
    group.bench_function("cbp", |b| b.iter(|| fit_voxel(Method::Cbp, black_box(&scheme), &signal, &fixed_c).unwrap()));
    group.finish();
}

fn geometry(c: &mut Criterion) {
    let mut group = c.benchmark_group("geometry");
    group.sample_size(10);
    group.bench_function("make_directions_150", |b| b.iter(|| make_directions(black_box(150), 0).unwrap()));
    let dirs = make_directions(40, 1).unwrap();
    let a = DiscreteFodf::new(dirs[..20].iter().map(|d| (*d, 1.0)));
    let b2 = DiscreteFodf::new(dirs[20..].iter().map(|d| (*d, 2.0)));
    group.bench_function("emd_20x20", |b| b.iter(|| emd(black_box(&a), &b2).unwrap()));
    group.finish();
}

criterion_group!(benches, solvers, pipelines, geometry);
criterion_main!(benches);
