//! Super-adiabatic projections and effective operators at a fixed ε.
//!
//! Increments `ΔP_k` carry their power of ε, so the recursion never divides
//! by ε. Everything past the recursion is kept low-rank where possible:
//! `χ(H)` is stored as `V diag(w) V†` over the eigenvectors below the cutoff,
//! `P_ε` as an orthonormal basis of its range and `U_ε` as `1 + Z K Z†`.

mod effective;
mod nenciu;

pub use effective::{
    adiabatic_operator, commutator_norm, effective_operator, second_order_correction,
    EffectiveOperator,
};
pub use nenciu::{
    intertwiner, intertwiner_from_bases, smooth_cutoff_projection, Intertwiner, NenciuProjection,
    AMBIGUITY_ZONE,
};

use faer::{c64, Mat};
use thiserror::Error;

use crate::bands::BandProjection;
use crate::calculus::CalculusError;
use crate::discretize::DiscreteOperator;
use crate::linalg;

/// Deepest supported recursion level.
pub const MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SuperadiabaticError {
    #[error("operator assembled at ε = {operator:?} but the stack is at ε = {stack}")]
    EpsilonMismatch { stack: f64, operator: Option<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("recursion depth {0} exceeds the supported maximum {MAX_DEPTH}")]
    UnsupportedDepth(usize),
    #[error(
        "regularized projection has eigenvalue {eigenvalue} inside the ambiguity zone [0.25, 0.75]"
    )]
    SpectralAmbiguity { eigenvalue: f64 },
    #[error("projection rank {got} differs from the band rank {expected}")]
    RankMismatch { expected: usize, got: usize },
    #[error("intertwiner check failed: {what} defect {defect:e}")]
    NonUnitaryIntertwiner { what: &'static str, defect: f64 },
    #[error("effective operator not Hermitian: defect {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("stack has no {0} yet")]
    MissingStage(&'static str),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

#[derive(Debug, Clone)]
pub struct ProjectionStack {
    pub epsilon: f64,
    pub p0: BandProjection,
    /// ΔP_1 … ΔP_N
    pub increments: Vec<Mat<c64>>,
    /// P^N = P_0 + Σ ΔP_k
    pub pn: Mat<c64>,
    pub pchi: Option<Mat<c64>>,
    pub peps: Option<NenciuProjection>,
    pub ueps: Option<Intertwiner>,
}

impl ProjectionStack {
    /// Depth-0 stack: P^0 = P_0.
    pub fn new(p0: &BandProjection, epsilon: f64) -> Self {
        Self {
            epsilon,
            p0: p0.clone(),
            increments: Vec::new(),
            pn: p0.operator.to_dense(),
            pchi: None,
            peps: None,
            ueps: None,
        }
    }

    pub fn depth(&self) -> usize {
        self.increments.len()
    }

    pub fn dim(&self) -> usize {
        self.pn.nrows()
    }

    /// P_0 + Σ_{k≤ℓ} ΔP_k
    pub fn partial_sum(&self, ell: usize) -> Mat<c64> {
        let mut p = self.p0.operator.to_dense();
        for inc in self.increments.iter().take(ell) {
            p += inc;
        }
        p
    }

    pub fn peps(&self) -> Result<&NenciuProjection, SuperadiabaticError> {
        self.peps
            .as_ref()
            .ok_or(SuperadiabaticError::MissingStage("projection P_eps"))
    }

    pub fn ueps(&self) -> Result<&Intertwiner, SuperadiabaticError> {
        self.ueps
            .as_ref()
            .ok_or(SuperadiabaticError::MissingStage("intertwiner U_eps"))
    }

    fn check_operator(
        &self,
        op: &DiscreteOperator,
        needs_epsilon: bool,
    ) -> Result<(), SuperadiabaticError> {
        if op.dim() != self.dim() {
            return Err(SuperadiabaticError::DimensionMismatch {
                expected: self.dim(),
                got: op.dim(),
            });
        }
        if needs_epsilon && op.epsilon() != Some(self.epsilon) {
            return Err(SuperadiabaticError::EpsilonMismatch {
                stack: self.epsilon,
                operator: op.epsilon(),
            });
        }
        Ok(())
    }
}

/// Appends ΔP_{N+1} = ΔP^O + ΔP^D with
/// ΔP^O = −P_0^⊥ R [H,P^N] P_0 + P_0 [H,P^N] R P_0^⊥ and
/// ΔP^D = −P_0 X P_0 + P_0^⊥ X P_0^⊥, X = Q_{N+1} − P^N,
/// Q_{N+1} = Σ_{k,ℓ≤N, k+ℓ≤N+1} ΔP_k ΔP_ℓ (ΔP_0 = P_0).
pub fn superadiabatic_step(
    stack: &ProjectionStack,
    h: &DiscreteOperator,
    r: &DiscreteOperator,
) -> Result<ProjectionStack, SuperadiabaticError> {
    stack.check_operator(h, true)?;
    stack.check_operator(r, false)?;
    let n = stack.depth();
    if n + 1 > MAX_DEPTH {
        return Err(SuperadiabaticError::UnsupportedDepth(n + 1));
    }
    let p0 = &stack.p0.operator;
    let pn = &stack.pn;

    // [H, P^N] = HP − PH = HP − (HP)† since both are Hermitian.
    let hp = h.apply(pn.as_ref());
    let comm = &hp - hp.adjoint();

    // −P_0^⊥ R C P_0 collapses to −R C P_0 because R P_0 = 0 = P_0 R.
    let rc = r.apply(comm.as_ref());
    let t = -p0.apply_left(rc.as_ref());
    let off = &t + t.adjoint();

    let mut q = p0.apply(p0.to_dense().as_ref());
    for k in 1..=n {
        let pk = &stack.increments[k - 1];
        // (0,k) and (k,0)
        let a = p0.apply(pk.as_ref());
        q += &a;
        q += a.adjoint();
    }
    for k in 1..=n {
        for l in k..=n {
            if k + l > n + 1 {
                continue;
            }
            let prod = &stack.increments[k - 1] * &stack.increments[l - 1];
            if k == l {
                q += &prod;
            } else {
                q += &prod;
                q += prod.adjoint();
            }
        }
    }
    let x = q - pn;
    // −P_0XP_0 + P_0^⊥XP_0^⊥ = X − P_0X − XP_0
    let diag = &x - p0.apply(x.as_ref()) - p0.apply_left(x.as_ref());

    let inc = linalg::symmetrize((off + diag).as_ref());
    let new_pn = linalg::symmetrize((pn + &inc).as_ref());
    let mut out = stack.clone();
    out.increments.push(inc);
    out.pn = new_pn;
    out.pchi = None;
    out.peps = None;
    out.ueps = None;
    Ok(out)
}

/// Iterates the recursion from P^0 = P_0 up to depth N.
pub fn build_pn(
    p0: &BandProjection,
    h: &DiscreteOperator,
    r: &DiscreteOperator,
    depth: usize,
    epsilon: f64,
) -> Result<ProjectionStack, SuperadiabaticError> {
    if depth > MAX_DEPTH {
        return Err(SuperadiabaticError::UnsupportedDepth(depth));
    }
    let mut stack = ProjectionStack::new(p0, epsilon);
    stack.check_operator(h, true)?;
    for _ in 0..depth {
        stack = superadiabatic_step(&stack, h, r)?;
    }
    Ok(stack)
}
