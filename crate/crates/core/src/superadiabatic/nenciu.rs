//! Regularized projection P^χ, the exact projection P_ε and the Sz.-Nagy
//! intertwiner U_ε.

use faer::{c64, Mat, MatRef};

use super::{ProjectionStack, SuperadiabaticError};
use crate::bands::BandProjection;
use crate::calculus::{eig_hermitian, operator_norm, Cutoff, SpectralDecomposition};
use crate::discretize::{DiscreteOperator, OperatorLabel, RawOperator, Storage};
use crate::linalg;

/// Eigenvalues of P^χ in this interval make the split into 0 and 1 ambiguous.
pub const AMBIGUITY_ZONE: (f64, f64) = (0.25, 0.75);

const DROP_RATIO: f64 = 1e-12;
const INTERTWINER_TOLERANCE: f64 = 1e-10;

/// P_ε with an orthonormal basis W of its range: P_ε = W W†.
#[derive(Debug, Clone)]
pub struct NenciuProjection {
    pub operator: DiscreteOperator,
    pub basis: Mat<c64>,
    /// Largest distance of an eigenvalue of P^χ from {0, 1}.
    pub cluster_spread: f64,
}

/// P^χ = P_0 + (P^N − P_0)χ(H) + χ(H)(P^N − P_0)(1 − χ(H)); then
/// P_ε = spectral projection of P^χ onto eigenvalues above 1/2.
///
/// ran(P^χ) lies in span{E, V, (P^N − P_0)V} with V the eigenvectors of H on
/// which χ does not vanish, so the eigenproblem is solved on that span.
pub fn smooth_cutoff_projection(
    stack: &ProjectionStack,
    h_spectrum: &SpectralDecomposition,
    cutoff: &Cutoff,
) -> Result<ProjectionStack, SuperadiabaticError> {
    let d = stack.dim();
    if h_spectrum.dim() != d {
        return Err(SuperadiabaticError::DimensionMismatch {
            expected: d,
            got: h_spectrum.dim(),
        });
    }
    let chi = h_spectrum.restrict(|s| cutoff.eval(s));
    let p0 = &stack.p0.operator;
    let x = &stack.pn - p0.to_dense();
    let v = &chi.vectors;
    let a = &x * v;
    let aw = linalg::scale_columns(a.as_ref(), &chi.weights);
    let vw = linalg::scale_columns(v.as_ref(), &chi.weights);
    // X χ = (A w) V†
    let term1 = &aw * v.adjoint();
    // χ X (1 − χ) = V w A† − V w (A† V) w V†
    let avw = linalg::scale_columns((a.adjoint() * v).as_ref(), &chi.weights);
    let term2 = &vw * a.adjoint() - &vw * (avw * v.adjoint());
    let pchi = linalg::symmetrize((p0.to_dense() + term1 + term2).as_ref());

    let span = linalg::orthonormal_basis(
        linalg::hcat(&[stack.p0.frame.as_ref(), v.as_ref(), a.as_ref()]).as_ref(),
        DROP_RATIO,
    );
    let compressed = linalg::symmetrize((span.adjoint() * (&pchi * &span)).as_ref());
    let eig = eig_hermitian(compressed.as_ref())?;
    let mut spread = 0.0f64;
    let mut keep = Vec::new();
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam >= AMBIGUITY_ZONE.0 && lam <= AMBIGUITY_ZONE.1 {
            return Err(SuperadiabaticError::SpectralAmbiguity { eigenvalue: lam });
        }
        spread = spread.max(lam.abs().min((lam - 1.0).abs()));
        if lam > 0.5 {
            keep.push(k);
        }
    }
    let rank = stack.p0.rank();
    if keep.len() != rank {
        return Err(SuperadiabaticError::RankMismatch {
            expected: rank,
            got: keep.len(),
        });
    }
    let y = Mat::from_fn(span.ncols(), keep.len(), |r, c| eig.vectors[(r, keep[c])]);
    let basis = &span * y;
    let dense = linalg::symmetrize((&basis * basis.adjoint()).as_ref());
    let operator = DiscreteOperator::new(
        Storage::Dense(dense),
        OperatorLabel::Projection,
        Some(stack.epsilon),
    )
    .expect("symmetrized projector is Hermitian");
    let mut out = stack.clone();
    out.pchi = Some(pchi);
    out.peps = Some(NenciuProjection {
        operator,
        basis,
        cluster_spread: spread,
    });
    out.ueps = None;
    Ok(out)
}

/// U = 1 + Z K Z†, the Sz.-Nagy unitary restricted to Z = span(ran P_0 ∪ ran P_ε).
#[derive(Debug, Clone)]
pub struct Intertwiner {
    pub span: Mat<c64>,
    pub core: Mat<c64>,
}

impl Intertwiner {
    pub fn dim(&self) -> usize {
        self.span.nrows()
    }

    /// U·X
    pub fn apply(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        x.to_owned() + &self.span * (&self.core * (self.span.adjoint() * x))
    }

    /// U†·X
    pub fn apply_adjoint(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        x.to_owned() + &self.span * (self.core.adjoint() * (self.span.adjoint() * x))
    }

    pub fn to_dense(&self) -> RawOperator {
        let u = linalg::identity(self.dim()) + &self.span * (&self.core * self.span.adjoint());
        RawOperator::new(u, OperatorLabel::Other)
    }
}

/// U_ε = (P_εP_0 + P_ε^⊥P_0^⊥)(1 − (P_0 − P_ε)²)^{-1/2}
pub fn intertwiner(
    peps: &NenciuProjection,
    p0: &BandProjection,
) -> Result<Intertwiner, SuperadiabaticError> {
    intertwiner_from_bases(peps.basis.as_ref(), p0.frame.as_ref())
}

/// Same construction for any two projections given by orthonormal bases of their ranges.
pub fn intertwiner_from_bases(
    w: MatRef<'_, c64>,
    e: MatRef<'_, c64>,
) -> Result<Intertwiner, SuperadiabaticError> {
    if w.nrows() != e.nrows() {
        return Err(SuperadiabaticError::DimensionMismatch {
            expected: e.nrows(),
            got: w.nrows(),
        });
    }
    if w.ncols() != e.ncols() {
        return Err(SuperadiabaticError::RankMismatch {
            expected: e.ncols(),
            got: w.ncols(),
        });
    }
    let z = linalg::orthonormal_basis(linalg::hcat(&[e, w]).as_ref(), DROP_RATIO);
    let k = z.ncols();
    let ez = z.adjoint() * e;
    let wz = z.adjoint() * w;
    let p0 = linalg::symmetrize((&ez * ez.adjoint()).as_ref());
    let pe = linalg::symmetrize((&wz * wz.adjoint()).as_ref());
    let id = linalg::identity(k);
    let diff = &p0 - &pe;
    let d2 = linalg::symmetrize((&diff * &diff).as_ref());
    let eig = eig_hermitian(d2.as_ref())?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    if top >= 1.0 - 1e-12 {
        return Err(SuperadiabaticError::NonUnitaryIntertwiner {
            what: "‖P_0 − P_eps‖ < 1",
            defect: top,
        });
    }
    let s = eig.apply(|t| 1.0 / (1.0 - t.max(0.0)).sqrt());
    let u = (&pe * &p0 + (&id - &pe) * (&id - &p0)) * s;

    let unitarity = operator_norm((u.adjoint() * &u - &id).as_ref())?;
    if !(unitarity <= INTERTWINER_TOLERANCE) {
        return Err(SuperadiabaticError::NonUnitaryIntertwiner {
            what: "unitarity",
            defect: unitarity,
        });
    }
    let inter = operator_norm((&u * &p0 - &pe * &u).as_ref())?;
    if !(inter <= INTERTWINER_TOLERANCE) {
        return Err(SuperadiabaticError::NonUnitaryIntertwiner {
            what: "intertwining",
            defect: inter,
        });
    }
    Ok(Intertwiner {
        core: u - id,
        span: z,
    })
}

impl ProjectionStack {
    /// Runs the Nenciu step and builds U_ε.
    pub fn complete(
        &self,
        h_spectrum: &SpectralDecomposition,
        cutoff: &Cutoff,
    ) -> Result<ProjectionStack, SuperadiabaticError> {
        let mut out = smooth_cutoff_projection(self, h_spectrum, cutoff)?;
        out.ueps = Some(intertwiner(out.peps()?, &out.p0)?);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Orthonormal basis of a rotated copy of the first `r` coordinate axes.
    fn rotated(d: usize, r: usize, angle: f64) -> Mat<c64> {
        let m = Mat::from_fn(d, r, |i, j| {
            if i == j {
                c64::new(angle.cos(), 0.0)
            } else if i == j + r {
                c64::new(0.0, angle.sin())
            } else if i == (j + 2 * r) % d {
                c64::new(0.1 * angle, 0.05)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        linalg::orthonormal_basis(m.as_ref(), 1e-12)
    }

    #[test]
    fn identical_projections_give_identity() {
        let e = rotated(12, 3, 0.0);
        let u = intertwiner_from_bases(e.as_ref(), e.as_ref()).unwrap();
        let dense = u.to_dense().matrix;
        assert!(linalg::max_abs((dense - linalg::identity(12)).as_ref()) < 1e-14);
    }

    #[test]
    fn close_projections_are_intertwined() {
        let d = 12;
        let e = rotated(d, 3, 0.0);
        let w = rotated(d, 3, 0.3);
        let u = intertwiner_from_bases(w.as_ref(), e.as_ref())
            .unwrap()
            .to_dense()
            .matrix;
        let p0 = &e * e.adjoint();
        let pe = &w * w.adjoint();
        assert!(operator_norm((u.adjoint() * &u - linalg::identity(d)).as_ref()).unwrap() < 1e-12);
        assert!(operator_norm((&u * &p0 - &pe * &u).as_ref()).unwrap() < 1e-12);
    }

    #[test]
    fn orthogonal_ranges_are_rejected() {
        let d = 8;
        let e = Mat::from_fn(d, 1, |i, _| {
            if i == 0 {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let w = Mat::from_fn(d, 1, |i, _| {
            if i == 1 {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        assert!(matches!(
            intertwiner_from_bases(w.as_ref(), e.as_ref()),
            Err(SuperadiabaticError::NonUnitaryIntertwiner { .. })
        ));
    }
}
