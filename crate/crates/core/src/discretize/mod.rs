//! Gauge-covariant finite differences on the grid.
//!
//! Every operator acts on the flat (half-density) representation
//! `φ = (h_x h_y)^{1/2} f^{1/4} ψ`, in which the discrete L²(vol) inner
//! product is Euclidean and every operator is a Hermitian matrix. Covariant
//! differences use link transports `U = exp(h·A)` in the form `U φ_b − φ_a`
//! along an edge a → b.

mod market;
mod operator;
mod sobolev;

pub use market::{read_matrix_market, write_matrix_market, MarketMatrix};
pub use operator::{
    BlockDiagonal, CsrMatrix, DiscreteOperator, OperatorLabel, RawOperator, Storage,
    HERMITIAN_TOLERANCE,
};
pub use sobolev::{sobolev_norm, MAX_SOBOLEV_ORDER};

use faer::{c64, Mat};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{BundleModel, Grid, MatrixField, PerturbationKind};
use crate::small::SmallMatrix;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DiscretizeError {
    #[error("x_index {x_index} out of range 0..{base_points}")]
    OutOfRange { x_index: usize, base_points: usize },
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("{label:?} operator not Hermitian: defect {defect:e}")]
    NotHermitian { label: OperatorLabel, defect: f64 },
    #[error("unsupported Sobolev order {0}")]
    UnsupportedOrder(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix market: {0}")]
    Format(String),
}

/// H^F(x_i) as a dense Hermitian matrix on interior fibre nodes × rank.
#[derive(Debug, Clone, PartialEq)]
pub struct FibreOperator {
    pub x_index: usize,
    pub matrix: Mat<c64>,
}

fn check_epsilon(eps: f64) -> Result<(), DiscretizeError> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(DiscretizeError::InvalidEpsilon(eps))
    }
}

/// Accumulates n×n blocks into triplets at grid positions.
struct Blocks<'a> {
    grid: &'a Grid,
    trip: Vec<(usize, usize, c64)>,
}

impl<'a> Blocks<'a> {
    fn new(grid: &'a Grid) -> Self {
        Self {
            grid,
            trip: Vec::new(),
        }
    }

    fn add(&mut self, row: (usize, usize), col: (usize, usize), m: &SmallMatrix, k: c64) {
        let n = self.grid.rank;
        for a in 0..n {
            for b in 0..n {
                let v = m.get(a, b) * k;
                if v != c64::new(0.0, 0.0) {
                    self.trip.push((
                        self.grid.index(row.0, row.1, a),
                        self.grid.index(col.0, col.1, b),
                        v,
                    ));
                }
            }
        }
    }

    /// Adds `m` at (row, col) and `m†` at (col, row).
    fn add_pair(&mut self, row: (usize, usize), col: (usize, usize), m: &SmallMatrix, k: c64) {
        self.add(row, col, m, k);
        self.add(col, row, &m.adjoint(), k.conj());
    }

    fn finish(self) -> CsrMatrix {
        let d = self.grid.dimension();
        CsrMatrix::from_triplets(d, d, self.trip)
    }
}

fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

pub fn assemble_fibre_operator(
    model: &BundleModel,
    x_index: usize,
) -> Result<FibreOperator, DiscretizeError> {
    let grid = model.grid();
    if x_index >= grid.base_points {
        return Err(DiscretizeError::OutOfRange {
            x_index,
            base_points: grid.base_points,
        });
    }
    let n = grid.rank;
    let nf = grid.fibre_points;
    let b = grid.block();
    let c = 1.0 / (model.warp[x_index] * grid.hy * grid.hy);
    let mut m = Mat::<c64>::zeros(b, b);
    let local = |j: usize, a: usize| (j - 1) * n + a;
    // |U φ_{j+1} − φ_j|² per vertical edge, Dirichlet nodes dropped.
    for j in 0..nf {
        let u = model.link_y(x_index, j);
        for a in 0..n {
            if j >= 1 {
                m[(local(j, a), local(j, a))] += re(c);
            }
            if j + 1 < nf {
                m[(local(j + 1, a), local(j + 1, a))] += re(c);
            }
        }
        if j >= 1 && j + 1 < nf {
            for a in 0..n {
                for bb in 0..n {
                    let v = u.get(a, bb) * (-c);
                    m[(local(j, a), local(j + 1, bb))] += v;
                    m[(local(j + 1, bb), local(j, a))] += v.conj();
                }
            }
        }
    }
    for j in 1..nf {
        let v = model.potential.at(x_index, j).hermitian_part();
        for a in 0..n {
            for bb in 0..n {
                m[(local(j, a), local(j, bb))] += v.get(a, bb);
            }
        }
    }
    Ok(FibreOperator { x_index, matrix: m })
}

/// blockdiag(H^F(x_i)) over the base.
pub fn assemble_fibre_block(model: &BundleModel) -> DiscreteOperator {
    let blocks: Vec<Mat<c64>> = (0..model.base_points)
        .into_par_iter()
        .map(|i| {
            assemble_fibre_operator(model, i)
                .expect("index in range")
                .matrix
        })
        .collect();
    DiscreteOperator::new(
        Storage::BlockDiagonal(BlockDiagonal::new(blocks)),
        OperatorLabel::HFBlock,
        None,
    )
    .expect("fibre operator is Hermitian by construction")
}

/// Σ over horizontal edges of `w_e/h_x² · (s_b U φ_b − s_a φ_a)† C (s_b U φ_b − s_a φ_a)`
/// with `s = f^{-1/4}`, edge weight `w_e = (√f_a + √f_b)/2` and C either the
/// identity (−Δ_H) or the edge average of a Hermitian coefficient field.
fn horizontal_form(model: &BundleModel, coefficient: Option<&MatrixField>) -> CsrMatrix {
    let grid = model.grid();
    let n = grid.rank;
    let mut acc = Blocks::new(&grid);
    let id = SmallMatrix::identity(n);
    for i in 0..grid.base_points {
        let ip = grid.next(i);
        let (fa, fb) = (model.warp[i], model.warp[ip]);
        let w = 0.5 * (fa.sqrt() + fb.sqrt()) / (grid.hx * grid.hx);
        let (sa, sb) = (fa.powf(-0.25), fb.powf(-0.25));
        for j in 1..grid.fibre_points {
            let u = model.link_x(i, j);
            match coefficient {
                None => {
                    acc.add((i, j), (i, j), &id, re(w * sa * sa));
                    acc.add((ip, j), (ip, j), &id, re(w * sb * sb));
                    acc.add_pair((i, j), (ip, j), &u, re(-w * sa * sb));
                }
                Some(cf) => {
                    let moved = &(&u * cf.at(ip, j)) * &u.adjoint();
                    let ce = (cf.at(i, j) + &moved).scale_re(0.5).hermitian_part();
                    let back = (&(&u.adjoint() * &ce) * &u).hermitian_part();
                    acc.add((i, j), (i, j), &ce, re(w * sa * sa));
                    acc.add((ip, j), (ip, j), &back, re(w * sb * sb));
                    acc.add_pair((i, j), (ip, j), &(&ce * &u), re(-w * sa * sb));
                }
            }
        }
    }
    acc.finish()
}

/// −Δ_H, ε-independent.
pub fn assemble_horizontal_laplacian(model: &BundleModel) -> DiscreteOperator {
    DiscreteOperator::new(
        Storage::Sparse(horizontal_form(model, None)),
        OperatorLabel::DeltaH,
        None,
    )
    .expect("horizontal Laplacian is Hermitian by construction")
}

/// The three ε-independent pieces of H_1: H_1(ε) = zeroth + ε·first + ε²·second.
#[derive(Debug, Clone)]
pub struct PerturbationParts {
    pub zeroth: CsrMatrix,
    pub first: CsrMatrix,
    pub second: CsrMatrix,
}

impl PerturbationParts {
    pub fn at(&self, eps: f64) -> CsrMatrix {
        CsrMatrix::combine(
            &[&self.zeroth, &self.first, &self.second],
            &[1.0, eps, eps * eps],
        )
    }
}

pub fn perturbation_parts(model: &BundleModel) -> PerturbationParts {
    let grid = model.grid();
    let d = grid.dimension();
    let spec = &model.perturbation;
    let empty = || CsrMatrix::zeros(d, d);
    if spec.kind == PerturbationKind::Zero {
        return PerturbationParts {
            zeroth: empty(),
            first: empty(),
            second: empty(),
        };
    }
    let mut z = Blocks::new(&grid);
    for i in 0..grid.base_points {
        for j in 1..grid.fibre_points {
            z.add(
                (i, j),
                (i, j),
                &spec.zeroth.at(i, j).hermitian_part(),
                re(1.0),
            );
        }
    }
    let zeroth = z.finish();
    match spec.kind {
        PerturbationKind::FirstOrder => {
            // (i/2)(b D_c + D_c b), D_c = (T − T†)/(2h_x), (Tφ)_i = U_i φ_{i+1}
            let mut acc = Blocks::new(&grid);
            let k = c64::new(0.0, 0.25 / grid.hx);
            for i in 0..grid.base_points {
                let ip = grid.next(i);
                for j in 1..grid.fibre_points {
                    let u = model.link_x(i, j);
                    let bi = spec.derivative.at(i, j).hermitian_part();
                    let bp = spec.derivative.at(ip, j).hermitian_part();
                    let x = &(&bi * &u) + &(&u * &bp);
                    acc.add_pair((i, j), (ip, j), &x, k);
                }
            }
            PerturbationParts {
                zeroth,
                first: acc.finish(),
                second: empty(),
            }
        }
        PerturbationKind::SecondOrder => PerturbationParts {
            zeroth,
            first: empty(),
            second: horizontal_form(model, Some(&spec.derivative)),
        },
        PerturbationKind::Zero => unreachable!(),
    }
}

/// H_1 with unit derivative scaling (the ε-independent operator).
pub fn assemble_perturbation(model: &BundleModel) -> DiscreteOperator {
    let m = perturbation_parts(model).at(1.0);
    DiscreteOperator::new(Storage::Sparse(m), OperatorLabel::H1, None)
        .expect("perturbation is Hermitian by construction")
}

/// The three addends of H(ε) and the rule that recombines them.
#[derive(Debug, Clone)]
pub struct Splitting {
    pub epsilon: f64,
    /// −Δ_H
    pub horizontal: DiscreteOperator,
    /// H_1(ε), with (εD_x)-scaled derivatives.
    pub perturbation: DiscreteOperator,
    /// blockdiag(H^F)
    pub fibre: DiscreteOperator,
}

impl Splitting {
    fn coefficients(&self) -> [f64; 3] {
        [self.epsilon * self.epsilon, self.epsilon, 1.0]
    }

    fn parts(&self) -> [CsrMatrix; 3] {
        [
            self.horizontal.to_csr(),
            self.perturbation.to_csr(),
            self.fibre.to_csr(),
        ]
    }

    /// H(ε) = ε²(−Δ_H) + εH_1(ε) + blockdiag(H^F).
    pub fn compose(&self) -> DiscreteOperator {
        let p = self.parts();
        let m = CsrMatrix::combine(&[&p[0], &p[1], &p[2]], &self.coefficients());
        DiscreteOperator::new(Storage::Sparse(m), OperatorLabel::HFull, Some(self.epsilon))
            .expect("sum of Hermitian parts is Hermitian")
    }

    /// max |H_rc − (ε²L_rc + εP_rc + F_rc)| over all entries of either pattern.
    pub fn defect(&self, h: &DiscreteOperator) -> f64 {
        let p = self.parts();
        let hc = h.to_csr();
        let coeffs = self.coefficients();
        let mut worst = 0.0f64;
        let mut check = |r: usize, c: usize| {
            let expect = operator::combine_entry(p.iter().map(|m| m.get(r, c)), &coeffs);
            worst = worst.max((hc.get(r, c) - expect).norm());
        };
        for (r, c, _) in hc.triplets() {
            check(r, c);
        }
        for m in &p {
            for (r, c, _) in m.triplets() {
                check(r, c);
            }
        }
        worst
    }
}

pub fn assemble_splitting(model: &BundleModel, eps: f64) -> Result<Splitting, DiscretizeError> {
    check_epsilon(eps)?;
    let pert = perturbation_parts(model).at(eps);
    Ok(Splitting {
        epsilon: eps,
        horizontal: assemble_horizontal_laplacian(model),
        perturbation: DiscreteOperator::new(Storage::Sparse(pert), OperatorLabel::H1, Some(eps))?,
        fibre: assemble_fibre_block(model),
    })
}

pub fn assemble_full(model: &BundleModel, eps: f64) -> Result<DiscreteOperator, DiscretizeError> {
    Ok(assemble_splitting(model, eps)?.compose())
}

/// G = blockdiag(g(x_i, y_j)) over interior nodes.
pub fn gauge_lift(model: &BundleModel, g: &MatrixField) -> BlockDiagonal {
    let grid = model.grid();
    let n = grid.rank;
    let b = grid.block();
    let blocks = (0..grid.base_points)
        .map(|i| {
            let mut m = Mat::<c64>::zeros(b, b);
            for j in 1..grid.fibre_points {
                let gm = g.at(i, j);
                for a in 0..n {
                    for c in 0..n {
                        m[((j - 1) * n + a, (j - 1) * n + c)] = gm.get(a, c);
                    }
                }
            }
            m
        })
        .collect();
    BlockDiagonal::new(blocks)
}
