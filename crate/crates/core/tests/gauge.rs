mod common;

use std::f64::consts::PI;

use adiabat_core::discretize::{assemble_fibre_block, gauge_lift};
use adiabat_core::model::{MatrixField, PerturbationKind};
use adiabat_core::{
    assemble_full, assemble_horizontal_laplacian, assemble_perturbation, c64, eig_hermitian,
    gauge_transform, BundleModel, DiscreteOperator, Mat, SmallMatrix,
};
use common::max_abs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(rank: usize, kind: PerturbationKind) -> BundleModel {
    BundleModel::builder(2.0 * PI, 10, 7, rank)
        .warp(|x| 1.0 + 0.25 * (x + 0.4).sin())
        .potential(move |x, y| {
            SmallMatrix::from_fn(rank, |r, c| match (r, c) {
                (r, c) if r == c => c64::new((r as f64 + 1.0) * x.cos() + 3.0 * y, 0.0),
                (r, c) if r < c => c64::new(0.5, 0.3 * x.sin()),
                _ => c64::new(0.5, -0.3 * x.sin()),
            })
        })
        .connection_x(move |x, y| {
            SmallMatrix::from_fn(rank, |r, c| match (r, c) {
                (r, c) if r == c => c64::new(0.0, 0.7 * x.sin() + y),
                (r, c) if r < c => c64::new(0.4 * y, 0.2),
                _ => c64::new(-0.4 * y, 0.2),
            })
        })
        .connection_y(move |x, _| {
            SmallMatrix::from_fn(rank, |r, c| {
                if r == c {
                    c64::new(0.0, x.cos())
                } else {
                    c64::new(0.0, 0.0)
                }
            })
        })
        .perturbation(
            kind,
            move |x, _| {
                SmallMatrix::from_fn(rank, |r, c| {
                    if r == c {
                        c64::new(0.5 + 0.2 * x.sin(), 0.0)
                    } else {
                        c64::new(0.0, 0.0)
                    }
                })
            },
            move |_, y| {
                SmallMatrix::from_fn(rank, |r, c| {
                    if r == c {
                        c64::new(y, 0.0)
                    } else {
                        c64::new(0.0, 0.1) * if r < c { 1.0 } else { -1.0 }
                    }
                })
            },
        )
        .build()
        .unwrap()
}

fn random_gauge(m: &BundleModel, rng: &mut ChaCha8Rng) -> MatrixField {
    let (nb, nf, n) = (m.base_points, m.fibre_points, m.rank);
    let mut g = MatrixField::identity(nb, nf + 1, n);
    for i in 0..nb {
        for j in 1..nf {
            let mut a = SmallMatrix::zeros(n);
            for r in 0..n {
                a.set(r, r, c64::new(0.0, rng.gen_range(-PI..PI)));
                for c in r + 1..n {
                    let z = c64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                    a.set(r, c, z);
                    a.set(c, r, -z.conj());
                }
            }
            *g.at_mut(i, j) = a.exp_antihermitian(1.0);
        }
    }
    g
}

fn conjugation_defect(g: &Mat<c64>, a: &DiscreteOperator, b: &DiscreteOperator) -> f64 {
    let a = a.to_dense();
    max_abs((g * &a * g.adjoint() - b.to_dense()).as_ref()) / max_abs(a.as_ref()).max(1.0)
}

#[test]
fn every_assembler_is_gauge_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for rank in [1, 2] {
        for kind in [PerturbationKind::FirstOrder, PerturbationKind::SecondOrder] {
            let m = model(rank, kind);
            for _ in 0..3 {
                let g = random_gauge(&m, &mut rng);
                let t = gauge_transform(&m, &g).unwrap();
                let lift = gauge_lift(&m, &g).to_dense();
                let pairs = [
                    (
                        assemble_horizontal_laplacian(&m),
                        assemble_horizontal_laplacian(&t),
                    ),
                    (assemble_perturbation(&m), assemble_perturbation(&t)),
                    (assemble_fibre_block(&m), assemble_fibre_block(&t)),
                    (
                        assemble_full(&m, 0.2).unwrap(),
                        assemble_full(&t, 0.2).unwrap(),
                    ),
                ];
                for (a, b) in &pairs {
                    let d = conjugation_defect(&lift, a, b);
                    assert!(d < 1e-12, "rank {rank} {kind:?} {:?}: {d:e}", a.label());
                }
            }
        }
    }
}

#[test]
fn spectra_are_gauge_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = model(2, PerturbationKind::FirstOrder);
    let g = random_gauge(&m, &mut rng);
    let t = gauge_transform(&m, &g).unwrap();
    let a = eig_hermitian(assemble_full(&m, 0.3).unwrap().to_dense().as_ref())
        .unwrap()
        .values;
    let b = eig_hermitian(assemble_full(&t, 0.3).unwrap().to_dense().as_ref())
        .unwrap()
        .values;
    let scale = a.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10 * scale);
    }
}

#[test]
fn non_unitary_gauge_rejected() {
    let m = model(1, PerturbationKind::Zero);
    let mut g = MatrixField::identity(m.base_points, m.fibre_points + 1, 1);
    *g.at_mut(3, 2) = SmallMatrix::scalar(c64::new(2.0, 0.0));
    assert!(gauge_transform(&m, &g).is_err());
}
