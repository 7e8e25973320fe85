//! Hermitian eigendecomposition, cutoff functions, functional calculus and
//! operator norms.

use faer::{c64, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{DiscreteOperator, OperatorLabel, RawOperator};
use crate::linalg;

/// Below this size the norm is read off a dense Gram eigendecomposition.
pub const DENSE_NORM_LIMIT: usize = 256;

const LANCZOS_TOL: f64 = 1e-12;
const LANCZOS_MAX_ITER: usize = 400;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CalculusError {
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: defect {defect:e} exceeds {tolerance:e}")]
    NotHermitian { defect: f64, tolerance: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("eigensolver did not converge")]
    NonConvergence,
    #[error("norm iteration did not converge after {iterations} steps")]
    NormNonConvergence { iterations: usize },
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
}

/// Ascending eigenvalues with orthonormal eigenvectors in the columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

pub fn eig_hermitian(m: MatRef<'_, c64>) -> Result<SpectralDecomposition, CalculusError> {
    if m.nrows() != m.ncols() {
        return Err(CalculusError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let scale = linalg::max_abs(m);
    if !scale.is_finite() {
        return Err(CalculusError::NonFinite);
    }
    let defect = linalg::hermitian_defect(m);
    let tolerance = 1e-10 * scale;
    if defect > tolerance {
        return Err(CalculusError::NotHermitian { defect, tolerance });
    }
    if m.nrows() == 0 {
        return Ok(SpectralDecomposition {
            values: vec![],
            vectors: Mat::zeros(0, 0),
        });
    }
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| CalculusError::NonConvergence)?;
    let s = eig.S();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok(SpectralDecomposition {
        values,
        vectors: eig.U().to_owned(),
    })
}

/// Eigenvalues only, ascending.
pub fn eigvals_hermitian(m: MatRef<'_, c64>) -> Result<Vec<f64>, CalculusError> {
    if m.nrows() != m.ncols() {
        return Err(CalculusError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    if !linalg::max_abs(m).is_finite() {
        return Err(CalculusError::NonFinite);
    }
    let mut v: Vec<f64> = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| CalculusError::NonConvergence)?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Dense f(M) = Σ f(λ_i) v_i v_i†.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Mat<c64> {
        self.restrict(f).to_dense()
    }

    /// Low-rank form of f(M), keeping only the eigenpairs with f(λ) ≠ 0.
    pub fn restrict(&self, f: impl Fn(f64) -> f64) -> SpectralFunction {
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&i| f(self.values[i]) != 0.0)
            .collect();
        let weights = keep.iter().map(|&i| f(self.values[i])).collect();
        let d = self.dim();
        let vectors = Mat::from_fn(d, keep.len(), |r, c| self.vectors[(r, keep[c])]);
        SpectralFunction {
            dim: d,
            vectors,
            weights,
        }
    }

    /// max_i ‖M v_i − λ_i v_i‖
    pub fn residual(&self, m: MatRef<'_, c64>) -> f64 {
        let mv = m * &self.vectors;
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            let r: f64 = (0..self.dim())
                .map(|i| (mv[(i, j)] - self.vectors[(i, j)] * self.values[j]).norm_sqr())
                .sum();
            worst = worst.max(r.sqrt());
        }
        worst
    }

    /// max |V†V − 1|
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.vectors.adjoint() * &self.vectors;
        linalg::max_abs((g - linalg::identity(self.dim())).as_ref())
    }

    /// Distance from `mu` to the nearest eigenvalue.
    pub fn distance_to_spectrum(&self, mu: f64) -> f64 {
        distance_to_sorted(&self.values, mu)
    }
}

pub fn distance_to_sorted(sorted: &[f64], mu: f64) -> f64 {
    let pos = sorted.partition_point(|&v| v < mu);
    let mut best = f64::INFINITY;
    if pos < sorted.len() {
        best = best.min((sorted[pos] - mu).abs());
    }
    if pos > 0 {
        best = best.min((sorted[pos - 1] - mu).abs());
    }
    best
}

/// f(M) = V diag(w) V† restricted to the eigenvectors where f does not vanish.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    dim: usize,
    pub vectors: Mat<c64>,
    pub weights: Vec<f64>,
}

impl SpectralFunction {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let vw = linalg::scale_columns(self.vectors.as_ref(), &self.weights);
        linalg::symmetrize((&vw * self.vectors.adjoint()).as_ref())
    }

    /// X·V·diag(w), so that X·f(M) = (X·V·diag(w))·V†.
    pub fn right_factor(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let xv = x * &self.vectors;
        linalg::scale_columns(xv.as_ref(), &self.weights)
    }

    /// ‖X·f(M)‖, exact since V has orthonormal columns.
    pub fn product_norm(&self, x: MatRef<'_, c64>) -> Result<f64, CalculusError> {
        operator_norm(self.right_factor(x).as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffShape {
    SmoothBump,
    SharpIndicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub lambda: f64,
    pub width: f64,
    pub shape: CutoffShape,
}

/// Energy cutoff: 1 on (−∞, Λ−w], 0 on [Λ, ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    spec: CutoffSpec,
}

pub fn smooth_cutoff(spec: CutoffSpec) -> Result<Cutoff, CalculusError> {
    if !(spec.width > 0.0 && spec.width.is_finite()) {
        return Err(CalculusError::InvalidCutoff(format!(
            "width must be positive, got {}",
            spec.width
        )));
    }
    if !spec.lambda.is_finite() {
        return Err(CalculusError::InvalidCutoff(
            "threshold must be finite".into(),
        ));
    }
    Ok(Cutoff { spec })
}

fn transition(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

impl Cutoff {
    pub fn spec(&self) -> CutoffSpec {
        self.spec
    }

    pub fn eval(&self, s: f64) -> f64 {
        let CutoffSpec {
            lambda,
            width,
            shape,
        } = self.spec;
        match shape {
            CutoffShape::SharpIndicator => {
                if s <= lambda {
                    1.0
                } else {
                    0.0
                }
            }
            CutoffShape::SmoothBump => {
                let t = (lambda - s) / width;
                if t <= 0.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    let a = transition(t);
                    a / (a + transition(1.0 - t))
                }
            }
        }
    }
}

/// f(H) for a Hermitian operator, densely.
pub fn apply_function(
    h: &DiscreteOperator,
    f: impl Fn(f64) -> f64,
) -> Result<RawOperator, CalculusError> {
    let dense = h.to_dense();
    let eig = eig_hermitian(dense.as_ref())?;
    Ok(RawOperator::new(eig.apply(f), OperatorLabel::Other))
}

/// Largest singular value.
pub fn operator_norm(a: MatRef<'_, c64>) -> Result<f64, CalculusError> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    if !linalg::max_abs(a).is_finite() {
        return Err(CalculusError::NonFinite);
    }
    if m.min(n) <= DENSE_NORM_LIMIT {
        let gram = if n <= m {
            a.adjoint() * a
        } else {
            a * a.adjoint()
        };
        let gram = linalg::symmetrize(gram.as_ref());
        let top = eigvals_hermitian(gram.as_ref())?
            .last()
            .copied()
            .unwrap_or(0.0);
        return Ok(top.max(0.0).sqrt());
    }
    lanczos_norm(a)
}

/// splitmix64-derived fixed start vector; deterministic across runs.
fn start_vector(n: usize) -> Vec<c64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let v: Vec<c64> = (0..n).map(|_| c64::new(next(), next())).collect();
    let nv = linalg::norm(&v);
    v.into_iter().map(|x| x / nv).collect()
}

/// Lanczos with full reorthogonalization on A†A (or AA†, whichever is smaller).
fn lanczos_norm(a: MatRef<'_, c64>) -> Result<f64, CalculusError> {
    let use_right = a.ncols() <= a.nrows();
    let n = if use_right { a.ncols() } else { a.nrows() };
    let apply = |v: &[c64]| -> Vec<c64> {
        let x = Mat::from_fn(n, 1, |i, _| v[i]);
        let y = if use_right {
            a.adjoint() * (a * &x)
        } else {
            a * (a.adjoint() * &x)
        };
        (0..n).map(|i| y[(i, 0)]).collect()
    };

    let mut basis: Vec<Vec<c64>> = vec![start_vector(n)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut previous = 0.0f64;
    let cap = LANCZOS_MAX_ITER.min(n);
    for k in 0..cap {
        let mut w = apply(&basis[k]);
        let ak = linalg::dot(&basis[k], &w).re;
        alpha.push(ak);
        for _ in 0..2 {
            for q in &basis {
                let c = linalg::dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let bk = linalg::norm(&w);
        let theta = tridiagonal_top(&alpha, &beta)?;
        let converged = k > 0 && (theta - previous).abs() <= LANCZOS_TOL * theta.abs();
        if converged || bk <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) || k + 1 == n {
            return Ok(theta.max(0.0).sqrt());
        }
        previous = theta;
        beta.push(bk);
        basis.push(w.into_iter().map(|x| x / bk).collect());
    }
    Err(CalculusError::NormNonConvergence { iterations: cap })
}

fn tridiagonal_top(alpha: &[f64], beta: &[f64]) -> Result<f64, CalculusError> {
    let k = alpha.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            c64::new(alpha[i], 0.0)
        } else if i + 1 == j {
            c64::new(beta[i], 0.0)
        } else if j + 1 == i {
            c64::new(beta[j], 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    Ok(eigvals_hermitian(t.as_ref())?
        .last()
        .copied()
        .unwrap_or(0.0))
}
