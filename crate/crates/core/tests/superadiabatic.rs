mod common;

use std::f64::consts::PI;

use adiabat_core::bands::{prepare_band, BandData, BandSelector};
use adiabat_core::discretize::{assemble_fibre_block, Storage};
use adiabat_core::superadiabatic::smooth_cutoff_projection;
use adiabat_core::{
    adiabatic_operator, assemble_full, build_pn, c64, commutator_norm, effective_operator,
    eig_hermitian, second_order_correction, smooth_cutoff, BundleModel, Cutoff, CutoffShape,
    CutoffSpec, DiscreteOperator, Mat, OperatorLabel, ProjectionStack, SmallMatrix,
    SpectralDecomposition, SuperadiabaticError,
};
use common::{coupled, flat, identity, max_abs, norm, slope};

fn cutoff(band: &BandData, shape: CutoffShape) -> Cutoff {
    let delta = band.certificate().delta;
    let lambda = 0.5 * (band.band_max() + band.next_band_min().unwrap());
    smooth_cutoff(CutoffSpec {
        lambda,
        width: 0.5 * delta,
        shape,
    })
    .unwrap()
}

struct Run {
    h: DiscreteOperator,
    spectrum: SpectralDecomposition,
    stack: ProjectionStack,
}

fn run(model: &BundleModel, band: &BandData, eps: f64, depth: usize) -> Run {
    let h = assemble_full(model, eps).unwrap();
    let spectrum = eig_hermitian(h.to_dense().as_ref()).unwrap();
    let stack = build_pn(&band.projection, &h, &band.resolvent, depth, eps)
        .unwrap()
        .complete(&spectrum, &cutoff(band, CutoffShape::SmoothBump))
        .unwrap();
    Run { h, spectrum, stack }
}

#[test]
fn depth_zero_is_p0() {
    let m = coupled(8, 8, 6.0);
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let h = assemble_full(&m, 0.1).unwrap();
    let s = build_pn(&band.projection, &h, &band.resolvent, 0, 0.1).unwrap();
    assert_eq!(s.depth(), 0);
    assert_eq!(s.pn, band.projection.operator.to_dense());
}

#[test]
fn flat_model_collapses() {
    let m = flat(16, 10);
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let eps = 1.0 / 16.0;
    let r = run(&m, &band, eps, 3);
    let p0 = band.projection.operator.to_dense();
    for inc in &r.stack.increments {
        assert!(norm(inc.as_ref()) < 1e-12);
    }
    let pe = r.stack.peps().unwrap().operator.to_dense();
    assert!(norm((&pe - &p0).as_ref()) < 1e-12);
    let u = r.stack.ueps().unwrap().to_dense().matrix;
    assert!(norm((&u - identity(u.nrows())).as_ref()) < 1e-12);

    let chi = r
        .spectrum
        .restrict(|s| cutoff(&band, CutoffShape::SmoothBump).eval(s));
    assert!(commutator_norm(&r.h, p0.as_ref(), &chi).unwrap() < 1e-12);
    assert!(
        norm(
            second_order_correction(&band.projection, &r.h, &band.resolvent)
                .unwrap()
                .matrix
                .as_ref()
        ) < 1e-12
    );

    // H_eff = H_a = ε²·circulant + λ₁.
    let heff = effective_operator(&r.stack, &r.h).unwrap().matrix;
    let ha = adiabatic_operator(&band.projection, &r.h).unwrap().matrix;
    assert!(max_abs((&heff - &ha).as_ref()) < 1e-12);
    let nb = m.base_points;
    let hx = 2.0 * PI / nb as f64;
    let k = eps * eps / (hx * hx);
    let lam = band.band.lambda[0];
    let circ = Mat::from_fn(nb, nb, |a, b| {
        if a == b {
            c64::new(2.0 * k + lam, 0.0)
        } else if (a + 1) % nb == b || (b + 1) % nb == a {
            c64::new(-k, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    assert!(max_abs((&ha - circ).as_ref()) < 1e-12 * lam);
}

#[test]
fn first_increment_is_off_diagonal() {
    let m = coupled(16, 10, 6.0);
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let h = assemble_full(&m, 1.0 / 32.0).unwrap();
    let s = build_pn(&band.projection, &h, &band.resolvent, 2, 1.0 / 32.0).unwrap();
    let p0 = band.projection.operator.to_dense();
    let q0 = identity(p0.nrows()) - &p0;
    let d1 = &s.increments[0];
    assert!(norm(d1.as_ref()) > 1e-6, "{:e}", norm(d1.as_ref()));
    assert!(max_abs((&p0 * d1 * &p0).as_ref()) < 1e-12);
    assert!(max_abs((&q0 * d1 * &q0).as_ref()) < 1e-12);
    assert!(adiabat_core::linalg::hermitian_defect(s.pn.as_ref()) < 1e-12);
    // The diagonal part of ΔP_2 cancels the defect of P^1.
    let p1 = s.partial_sum(1);
    let p2 = &s.pn;
    let defect1 = norm((&p1 * &p1 - &p1).as_ref());
    let defect2 = norm((p2 * p2 - p2).as_ref());
    assert!(defect2 < 0.1 * defect1, "{defect2:e} vs {defect1:e}");
}

#[test]
fn fibre_only_operator_gives_band_function() {
    let m = coupled(12, 10, 6.0);
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let eps = 0.1;
    let hf = assemble_fibre_block(&m);
    let h = DiscreteOperator::new(
        Storage::Dense(hf.to_dense()),
        OperatorLabel::HFull,
        Some(eps),
    )
    .unwrap();
    let spectrum = eig_hermitian(h.to_dense().as_ref()).unwrap();
    let stack = build_pn(&band.projection, &h, &band.resolvent, 2, eps)
        .unwrap()
        .complete(&spectrum, &cutoff(&band, CutoffShape::SmoothBump))
        .unwrap();
    let diag = Mat::from_fn(12, 12, |a, b| {
        if a == b {
            c64::new(band.band.lambda[a], 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let heff = effective_operator(&stack, &h).unwrap().matrix;
    let ha = adiabatic_operator(&band.projection, &h).unwrap().matrix;
    assert!(max_abs((&heff - &diag).as_ref()) < 1e-10);
    assert!(max_abs((&ha - &diag).as_ref()) < 1e-10);
}

#[test]
fn nenciu_projection_and_intertwiner() {
    let m = coupled(32, 12, 6.0);
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let r = run(&m, &band, 1.0 / 32.0, 2);
    let peps = r.stack.peps().unwrap();
    assert!(peps.cluster_spread < 0.1);
    assert_eq!(peps.basis.ncols(), 32);
    let pe = peps.operator.to_dense();
    assert!(norm((&pe * &pe - &pe).as_ref()) < 1e-12);
    let u = r.stack.ueps().unwrap().to_dense().matrix;
    let p0 = band.projection.operator.to_dense();
    assert!(max_abs((u.adjoint() * &u - identity(u.nrows())).as_ref()) < 1e-10);
    assert!(max_abs((&u * &p0 - &pe * &u).as_ref()) < 1e-10);
    let heff = effective_operator(&r.stack, &r.h).unwrap();
    assert!(heff.hermiticity_defect < 1e-10);
}

/// Rank 2: the fibre ground state turns once around the base, gap 0.3.
fn near_degenerate() -> BundleModel {
    BundleModel::builder(2.0 * PI, 32, 6, 2)
        .potential(|x, _| {
            let (c, s) = (x.cos(), x.sin());
            let gap = 0.3;
            SmallMatrix::from_fn(2, |r, k| match (r, k) {
                (0, 0) => c64::new(gap * s * s, 0.0),
                (1, 1) => c64::new(gap * c * c, 0.0),
                _ => c64::new(-gap * c * s, 0.0),
            })
        })
        .build()
        .unwrap()
}

#[test]
fn large_epsilon_is_ambiguous() {
    let m = near_degenerate();
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let eps = 0.9;
    let h = assemble_full(&m, eps).unwrap();
    let spectrum = eig_hermitian(h.to_dense().as_ref()).unwrap();
    let stack = build_pn(&band.projection, &h, &band.resolvent, 2, eps).unwrap();
    let err = smooth_cutoff_projection(&stack, &spectrum, &cutoff(&band, CutoffShape::SmoothBump))
        .unwrap_err();
    assert!(
        matches!(err, SuperadiabaticError::SpectralAmbiguity { .. }),
        "{err:?}"
    );
}

#[test]
fn effective_spectrum_tracks_adiabatic_at_second_order() {
    let m = coupled(32, 12, 6.0);
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let gap = |eps: f64| {
        let r = run(&m, &band, eps, 2);
        let a = eig_hermitian(effective_operator(&r.stack, &r.h).unwrap().matrix.as_ref())
            .unwrap()
            .values;
        let b = eig_hermitian(
            adiabatic_operator(&band.projection, &r.h)
                .unwrap()
                .matrix
                .as_ref(),
        )
        .unwrap()
        .values;
        a.iter()
            .zip(&b)
            .take(5)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let (g1, g2) = (gap(1.0 / 16.0), gap(1.0 / 32.0));
    assert!(g2 < 0.4 * g1, "{g1:e} → {g2:e}");
}

#[test]
fn correction_is_second_order() {
    let m = coupled(32, 12, 6.0);
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let norms: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let h = assemble_full(&m, e).unwrap();
            norm(
                second_order_correction(&band.projection, &h, &band.resolvent)
                    .unwrap()
                    .matrix
                    .as_ref(),
            )
        })
        .collect();
    assert!(slope(&eps, &norms) >= 1.7, "{norms:?}");
}

#[test]
fn sharp_and_smooth_cutoffs_agree_on_the_rate() {
    let m = coupled(32, 12, 6.0);
    let band = prepare_band(&m, BandSelector::default()).unwrap();
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let mut smooth = Vec::new();
    let mut sharp = Vec::new();
    for &e in &eps {
        let h = assemble_full(&m, e).unwrap();
        let spectrum = eig_hermitian(h.to_dense().as_ref()).unwrap();
        let s = build_pn(&band.projection, &h, &band.resolvent, 1, e).unwrap();
        for (shape, out) in [
            (CutoffShape::SmoothBump, &mut smooth),
            (CutoffShape::SharpIndicator, &mut sharp),
        ] {
            let c = cutoff(&band, shape);
            let rho = spectrum.restrict(|x| c.eval(x));
            out.push(commutator_norm(&h, s.pn.as_ref(), &rho).unwrap());
        }
    }
    let (a, b) = (slope(&eps, &smooth), slope(&eps, &sharp));
    assert!(a >= 1.7, "smooth slope {a}");
    assert!((a - b).abs() <= 0.2, "{a} vs {b}");
}
