use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use tvdbar_bench::heart_and_lungs;
use tvdbar_core::beltrami::BeltramiSolver;
use tvdbar_core::boundary_cgo::scattering_from_dn;
use tvdbar_core::dbar::DbarSolver;
use tvdbar_core::forward::{assemble_nd_from_spec, nd_to_dn};
use tvdbar_core::phantoms::beltrami_mu;
use tvdbar_core::tv_seg::{segment, SegmentConfig};
use tvdbar_core::{FemMesh, KGrid, PhantomSpec, TrigBasis};

fn fem(c: &mut Criterion) {
    let basis = TrigBasis::new(16).unwrap();
    let mesh = FemMesh::disc(64).unwrap();
    let spec = PhantomSpec::heart_and_lungs();
    c.bench_function("fem_nd_64_rings", |b| b.iter(|| assemble_nd_from_spec(&spec, &basis, &mesh).unwrap()));
}

fn beltrami(c: &mut Criterion) {
    let sigma = heart_and_lungs(7);
    let mu = beltrami_mu(&sigma).unwrap();
    let solver = BeltramiSolver::new(sigma.grid().clone(), &mu).unwrap();
    c.bench_function("beltrami_tau_k6", |b| b.iter(|| solver.tau(Complex64::new(6.0, 2.0)).unwrap()));
}

fn dbar(c: &mut Criterion) {
    let basis = TrigBasis::new(16).unwrap();
    let mesh = FemMesh::disc(32).unwrap();
    let nd = assemble_nd_from_spec(&PhantomSpec::heart_and_lungs(), &basis, &mesh).unwrap();
    let dn = nd_to_dn(&nd).unwrap();
    let kgrid = Arc::new(KGrid::new(6, 5.0, 10.0).unwrap());
    let field = scattering_from_dn(&dn, kgrid, 5.0).unwrap();
    let solver = DbarSolver::new(&field, 5.0).unwrap();
    c.bench_function("dbar_solve_at_R5", |b| b.iter(|| solver.solve_at(Complex64::new(0.3, -0.2)).unwrap()));
}

fn tv(c: &mut Criterion) {
    let sigma = heart_and_lungs(7);
    let cfg = SegmentConfig::default();
    let mut group = c.benchmark_group("tv");
    group.sample_size(10);
    group.bench_function("segment_128", |b| b.iter(|| segment(&sigma, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, fem, beltrami, dbar, tv);
criterion_main!(benches);
