//! Operators compressed to the band coefficient space, and commutator norms.

use faer::{c64, Mat, MatRef};

use super::{ProjectionStack, SuperadiabaticError};
use crate::bands::BandProjection;
use crate::calculus::{CalculusError, SpectralFunction};
use crate::discretize::DiscreteOperator;
use crate::linalg;

const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// A Hermitian matrix on the band coefficient space (dimension N_B·m) and
/// the frame that embeds coefficients into the grid space.
#[derive(Debug, Clone)]
pub struct EffectiveOperator {
    pub matrix: Mat<c64>,
    pub frame: Mat<c64>,
    /// Hermiticity defect before symmetrization.
    pub hermiticity_defect: f64,
}

impl EffectiveOperator {
    fn from_raw(raw: Mat<c64>, frame: Mat<c64>) -> Result<Self, SuperadiabaticError> {
        let defect = linalg::hermitian_defect(raw.as_ref());
        if !(defect <= HERMITIAN_TOLERANCE) {
            return Err(SuperadiabaticError::NotHermitian { defect });
        }
        Ok(Self {
            matrix: linalg::symmetrize(raw.as_ref()),
            frame,
            hermiticity_defect: defect,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn check_dims(p0: &BandProjection, h: &DiscreteOperator) -> Result<(), SuperadiabaticError> {
    if p0.frame.nrows() != h.dim() {
        return Err(SuperadiabaticError::DimensionMismatch {
            expected: p0.frame.nrows(),
            got: h.dim(),
        });
    }
    Ok(())
}

/// H_a = P_0 H P_0 in the band frame: E† H E.
pub fn adiabatic_operator(
    p0: &BandProjection,
    h: &DiscreteOperator,
) -> Result<EffectiveOperator, SuperadiabaticError> {
    check_dims(p0, h)?;
    let e = &p0.frame;
    let he = h.apply(e.as_ref());
    EffectiveOperator::from_raw(e.adjoint() * he, e.clone())
}

/// H_eff = U_ε† P_ε H P_ε U_ε in the band frame: with Y = P_ε U_ε E, Y† H Y.
pub fn effective_operator(
    stack: &ProjectionStack,
    h: &DiscreteOperator,
) -> Result<EffectiveOperator, SuperadiabaticError> {
    stack.check_operator(h, true)?;
    let peps = stack.peps()?;
    let u = stack.ueps()?;
    let ue = u.apply(stack.p0.frame.as_ref());
    let w = &peps.basis;
    let y = w * (w.adjoint() * ue);
    let hy = h.apply(y.as_ref());
    EffectiveOperator::from_raw(y.adjoint() * hy, y)
}

/// M = P_0 [P_0,H] R [P_0,H] P_0 in the band frame.
pub fn second_order_correction(
    p0: &BandProjection,
    h: &DiscreteOperator,
    r: &DiscreteOperator,
) -> Result<EffectiveOperator, SuperadiabaticError> {
    check_dims(p0, h)?;
    let e = &p0.frame;
    let he = h.apply(e.as_ref());
    // [P_0,H] E = P_0 H E − H E, and E† [P_0,H] = −([P_0,H] E)†.
    let ce = p0.operator.apply(he.as_ref()) - &he;
    let rce = r.apply(ce.as_ref());
    let m = -(ce.adjoint() * rce);
    EffectiveOperator::from_raw(m, e.clone())
}

/// ‖[H, P] ρ(H)‖ with ρ(H) in low-rank form: [H,P] V diag(w).
pub fn commutator_norm(
    h: &DiscreteOperator,
    p: MatRef<'_, c64>,
    rho: &SpectralFunction,
) -> Result<f64, CalculusError> {
    let v = &rho.vectors;
    let pv = p * v;
    let hpv = h.apply(pv.as_ref());
    let hv = h.apply(v.as_ref());
    let phv = p * hv;
    let c = linalg::scale_columns((hpv - phv).as_ref(), &rho.weights);
    crate::calculus::operator_norm(c.as_ref())
}
