#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nsrom::mesh::{BcSpec, ForcingSpec, Operators, StaggeredGrid};
use nsrom::numerics::SparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn ops(nx: usize, ny: usize, bc: BcSpec) -> Operators {
    let g = StaggeredGrid::new(nx, ny, (0.0, 1.0), (0.0, 1.0), bc).unwrap();
    Operators::assemble(g, ForcingSpec::None).unwrap()
}

pub fn dense(m: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplets() {
        d[(i, j)] += v;
    }
    d
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Removes the divergent part of `v` with homogeneous boundary data:
/// `v - Omega^-1 G Lbar^-1 M v`.
pub fn project_div_free(o: &Operators, v: &[f64]) -> Vec<f64> {
    let lift = o.lift_rhs(&o.m.mul_vec(v)).unwrap();
    v.iter().zip(&lift).map(|(a, b)| a - b).collect()
}

use faer::Mat;
use nsrom::boundary::{BcReduction, BoundaryModel, TimeGrid};
use nsrom::fom::{fom_integrate, FomOptions, SnapshotSet};
use nsrom::lifting::{homogeneous_pod, homogenize_snapshots, LiftingOperator, PodBasis};
use nsrom::rom::RomOperators;

/// A complete small offline pipeline on an inflow/outflow channel.
pub struct Small {
    pub ops: Operators,
    pub model: BoundaryModel,
    pub time: TimeGrid,
    pub fom: SnapshotSet,
    pub pod: PodBasis,
    pub bc: BcReduction,
    pub lift: LiftingOperator,
    pub rom: RomOperators,
}

pub fn small(
    nx: usize,
    ny: usize,
    steps: usize,
    t_end: f64,
    r: usize,
    r_bc: usize,
    model: BoundaryModel,
) -> Small {
    let g = StaggeredGrid::new(
        nx,
        ny,
        (0.0, 5.0),
        (-1.0, 1.0),
        BcSpec::inflow_outflow(0.02, 0.0),
    )
    .unwrap();
    let disk = nsrom::mesh::ActuatorDisk {
        x: 1.5,
        y_center: 0.0,
        length: 0.8,
        force: 0.25,
    };
    let ops = Operators::assemble(g, ForcingSpec::Actuator(disk)).unwrap();
    let time = TimeGrid::new(0.0, t_end, steps).unwrap();
    let fom = fom_integrate(&ops, &model, time, FomOptions::default()).unwrap();
    let mut hom = fom.clone();
    hom.pressure = None;
    homogenize_snapshots(&mut hom, &ops, &model).unwrap();
    let pod = homogeneous_pod(&hom.velocity, &ops, r).unwrap();
    drop(hom);
    let bc = BcReduction::new(&model, &ops.grid, time, r_bc).unwrap();
    let lift = LiftingOperator::build(&ops, &bc).unwrap();
    let rom = RomOperators::build(&ops, &pod, &lift, &bc).unwrap();
    Small {
        ops,
        model,
        time,
        fom,
        pod,
        bc,
        lift,
        rom,
    }
}

pub fn mat_max(m: &Mat<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| max_abs(m.col_as_slice(j)))
        .fold(0.0, f64::max)
}
