//! The continuum problem: a warped circle × interval bundle with potential,
//! connection and perturbation fields sampled on the tensor grid.
//!
//! Grid conventions:
//! * base nodes `x_i = i·L/N_B`, periodic;
//! * fibre nodes `y_j = j/N_F`, `j = 0..=N_F`, Dirichlet at both ends;
//! * `potential` and the perturbation coefficients live on nodes `(x_i, y_j)`;
//! * `connection_x` lives on horizontal edges `(x_i + h_x/2, y_j)`;
//! * `connection_y` lives on vertical edges `(x_i, y_j + h_y/2)`, `j = 0..N_F`.

mod config;

pub use config::{
    build_model, sample_model, FieldTerm, ModelConfig, PerturbationConfig, WarpConfig, XProfile,
    YProfile,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::small::SmallMatrix;

pub const MIN_BASE_POINTS: usize = 6;
pub const MAX_BASE_POINTS: usize = 4096;
pub const MIN_FIBRE_POINTS: usize = 4;
pub const MAX_FIBRE_POINTS: usize = 1024;
pub const MAX_RANK: usize = 8;
pub const MAX_DIMENSION: usize = 8192;
/// Absolute tolerance for Hermiticity, anti-Hermiticity, unitarity and positivity.
pub const FIELD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid resolution: {0}")]
    Resolution(String),
    #[error("base circumference must be positive and finite, got {0}")]
    Circumference(f64),
    #[error("warp not positive at x_index {x_index} (x = {x}): f = {value}")]
    NonPositiveWarp { x_index: usize, x: f64, value: f64 },
    #[error(
        "{field} is not {property} at (x_index {x_index}, y_index {y_index}): defect {defect:e}"
    )]
    FieldSymmetry {
        field: &'static str,
        property: &'static str,
        x_index: usize,
        y_index: usize,
        defect: f64,
    },
    #[error("{field} has non-finite samples")]
    NonFinite { field: &'static str },
    #[error("{0} is not periodic on the base")]
    NonPeriodic(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(
        "gauge field not unitary at (x_index {x_index}, y_index {y_index}): defect {defect:e}"
    )]
    NonUnitaryGauge {
        x_index: usize,
        y_index: usize,
        defect: f64,
    },
    #[error(
        "gauge field must be the identity at the Dirichlet ends; violated at x_index {x_index}"
    )]
    GaugeNotIdentityAtEnds { x_index: usize },
    #[error("config: {0}")]
    Config(String),
}

/// Grid sizes and spacings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub base_points: usize,
    pub fibre_points: usize,
    pub rank: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    /// Size of one fibre block: interior nodes × rank.
    pub fn block(&self) -> usize {
        (self.fibre_points - 1) * self.rank
    }

    pub fn dimension(&self) -> usize {
        self.base_points * self.block()
    }

    /// Global index of component `a` at base node `i`, interior fibre node `j ∈ 1..N_F`.
    #[inline]
    pub fn index(&self, i: usize, j: usize, a: usize) -> usize {
        debug_assert!(j >= 1 && j < self.fibre_points && a < self.rank);
        (i * (self.fibre_points - 1) + (j - 1)) * self.rank + a
    }

    pub fn next(&self, i: usize) -> usize {
        (i + 1) % self.base_points
    }

    pub fn prev(&self, i: usize) -> usize {
        (i + self.base_points - 1) % self.base_points
    }
}

/// n×n matrices sampled on an `nx × ny` grid, stored x-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixField {
    pub nx: usize,
    pub ny: usize,
    pub rank: usize,
    pub data: Vec<SmallMatrix>,
}

impl MatrixField {
    pub fn zeros(nx: usize, ny: usize, rank: usize) -> Self {
        Self {
            nx,
            ny,
            rank,
            data: vec![SmallMatrix::zeros(rank); nx * ny],
        }
    }

    pub fn identity(nx: usize, ny: usize, rank: usize) -> Self {
        Self {
            nx,
            ny,
            rank,
            data: vec![SmallMatrix::identity(rank); nx * ny],
        }
    }

    pub fn from_fn(
        nx: usize,
        ny: usize,
        rank: usize,
        f: impl Fn(usize, usize) -> SmallMatrix,
    ) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                data.push(f(i, j));
            }
        }
        Self { nx, ny, rank, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &SmallMatrix {
        &self.data[i * self.ny + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut SmallMatrix {
        &mut self.data[i * self.ny + j]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(SmallMatrix::is_zero)
    }

    fn check_shape(&self, name: &str, nx: usize, ny: usize, rank: usize) -> Result<(), ModelError> {
        if self.nx != nx || self.ny != ny || self.rank != rank || self.data.len() != nx * ny {
            return Err(ModelError::Shape(format!(
                "{name} must be {nx}×{ny} samples of {rank}×{rank} matrices"
            )));
        }
        if self.data.iter().any(|m| m.dim() != rank) {
            return Err(ModelError::Shape(format!(
                "{name} has a sample of the wrong rank"
            )));
        }
        Ok(())
    }

    /// Worst value of `defect` over the grid, with its location.
    fn worst(&self, defect: impl Fn(&SmallMatrix) -> f64) -> (f64, usize, usize) {
        let mut out = (0.0, 0, 0);
        for i in 0..self.nx {
            for j in 0..self.ny {
                let d = defect(self.at(i, j));
                if d > out.0 || d.is_nan() {
                    out = (d, i, j);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Zero,
    FirstOrder,
    SecondOrder,
}

/// H_1 = zeroth(x,y) + derivative term; the derivative term is
/// `(i/2)(b·∂ + ∂·b)` for first order and `∂†c∂` for second order, with ∂
/// the covariant x-difference. Both coefficients are Hermitian node fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub derivative: MatrixField,
    pub zeroth: MatrixField,
}

impl PerturbationSpec {
    pub fn zero(nx: usize, ny: usize, rank: usize) -> Self {
        Self {
            kind: PerturbationKind::Zero,
            derivative: MatrixField::zeros(nx, ny, rank),
            zeroth: MatrixField::zeros(nx, ny, rank),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kind == PerturbationKind::Zero || (self.derivative.is_zero() && self.zeroth.is_zero())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleModel {
    pub base_circumference: f64,
    pub base_points: usize,
    pub fibre_points: usize,
    pub rank: usize,
    /// f(x_i) > 0
    pub warp: Vec<f64>,
    pub potential: MatrixField,
    pub connection_x: MatrixField,
    pub connection_y: MatrixField,
    pub perturbation: PerturbationSpec,
}

impl BundleModel {
    pub fn builder(
        base_circumference: f64,
        base_points: usize,
        fibre_points: usize,
        rank: usize,
    ) -> ModelBuilder {
        ModelBuilder::new(base_circumference, base_points, fibre_points, rank)
    }

    pub fn grid(&self) -> Grid {
        Grid {
            base_points: self.base_points,
            fibre_points: self.fibre_points,
            rank: self.rank,
            hx: self.base_circumference / self.base_points as f64,
            hy: 1.0 / self.fibre_points as f64,
        }
    }

    pub fn dimension(&self) -> usize {
        self.grid().dimension()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.grid().hx
    }

    /// Parallel transport along the horizontal edge (i, j) → (i+1, j).
    pub fn link_x(&self, i: usize, j: usize) -> SmallMatrix {
        self.connection_x.at(i, j).exp_antihermitian(self.grid().hx)
    }

    /// Parallel transport along the vertical edge (i, j) → (i, j+1).
    pub fn link_y(&self, i: usize, j: usize) -> SmallMatrix {
        self.connection_y.at(i, j).exp_antihermitian(self.grid().hy)
    }

    /// Rejects anything `validate_model` would flag.
    pub fn check(&self) -> Result<(), ModelError> {
        check_resolution(self.base_points, self.fibre_points, self.rank)?;
        if !(self.base_circumference > 0.0 && self.base_circumference.is_finite()) {
            return Err(ModelError::Circumference(self.base_circumference));
        }
        let (nb, nf, n) = (self.base_points, self.fibre_points, self.rank);
        if self.warp.len() != nb {
            return Err(ModelError::Shape(format!("warp must have {nb} samples")));
        }
        for (i, &f) in self.warp.iter().enumerate() {
            if !(f > FIELD_TOLERANCE) || !f.is_finite() {
                return Err(ModelError::NonPositiveWarp {
                    x_index: i,
                    x: self.x(i),
                    value: f,
                });
            }
        }
        self.potential.check_shape("potential", nb, nf + 1, n)?;
        self.connection_x
            .check_shape("connection_x", nb, nf + 1, n)?;
        self.connection_y.check_shape("connection_y", nb, nf, n)?;
        self.perturbation
            .derivative
            .check_shape("perturbation.derivative", nb, nf + 1, n)?;
        self.perturbation
            .zeroth
            .check_shape("perturbation.zeroth", nb, nf + 1, n)?;
        for (name, field) in self.fields() {
            if field.data.iter().any(|m| !m.is_finite()) {
                return Err(ModelError::NonFinite { field: name });
            }
        }
        for (name, field, property, defect) in self.symmetry_checks() {
            let (d, i, j) = field.worst(defect);
            if d > FIELD_TOLERANCE {
                return Err(ModelError::FieldSymmetry {
                    field: name,
                    property,
                    x_index: i,
                    y_index: j,
                    defect: d,
                });
            }
        }
        Ok(())
    }

    fn fields(&self) -> [(&'static str, &MatrixField); 5] {
        [
            ("potential", &self.potential),
            ("connection_x", &self.connection_x),
            ("connection_y", &self.connection_y),
            ("perturbation.derivative", &self.perturbation.derivative),
            ("perturbation.zeroth", &self.perturbation.zeroth),
        ]
    }

    #[allow(clippy::type_complexity)]
    fn symmetry_checks(
        &self,
    ) -> [(
        &'static str,
        &MatrixField,
        &'static str,
        fn(&SmallMatrix) -> f64,
    ); 5] {
        [
            (
                "potential",
                &self.potential,
                "Hermitian",
                SmallMatrix::hermitian_defect,
            ),
            (
                "connection_x",
                &self.connection_x,
                "anti-Hermitian",
                SmallMatrix::antihermitian_defect,
            ),
            (
                "connection_y",
                &self.connection_y,
                "anti-Hermitian",
                SmallMatrix::antihermitian_defect,
            ),
            (
                "perturbation.derivative",
                &self.perturbation.derivative,
                "Hermitian",
                SmallMatrix::hermitian_defect,
            ),
            (
                "perturbation.zeroth",
                &self.perturbation.zeroth,
                "Hermitian",
                SmallMatrix::hermitian_defect,
            ),
        ]
    }
}

fn check_resolution(nb: usize, nf: usize, n: usize) -> Result<(), ModelError> {
    if !(MIN_BASE_POINTS..=MAX_BASE_POINTS).contains(&nb) {
        return Err(ModelError::Resolution(format!(
            "base_points must lie in {MIN_BASE_POINTS}..={MAX_BASE_POINTS}, got {nb}"
        )));
    }
    if !(MIN_FIBRE_POINTS..=MAX_FIBRE_POINTS).contains(&nf) {
        return Err(ModelError::Resolution(format!(
            "fibre_points must lie in {MIN_FIBRE_POINTS}..={MAX_FIBRE_POINTS}, got {nf}"
        )));
    }
    if !(1..=MAX_RANK).contains(&n) {
        return Err(ModelError::Resolution(format!(
            "rank must lie in 1..={MAX_RANK}, got {n}"
        )));
    }
    let d = nb * (nf - 1) * n;
    if d > MAX_DIMENSION {
        return Err(ModelError::Resolution(format!(
            "dimension {d} exceeds {MAX_DIMENSION}"
        )));
    }
    Ok(())
}

type FieldFn = Box<dyn Fn(f64, f64) -> SmallMatrix>;

/// Samples closures on the grid. Fields left unset are zero; the warp defaults to 1.
pub struct ModelBuilder {
    l: f64,
    nb: usize,
    nf: usize,
    n: usize,
    warp: Option<Box<dyn Fn(f64) -> f64>>,
    warp_samples: Option<Vec<f64>>,
    potential: Option<FieldFn>,
    connection_x: Option<FieldFn>,
    connection_y: Option<FieldFn>,
    perturbation: Option<(PerturbationKind, FieldFn, FieldFn)>,
}

impl ModelBuilder {
    pub fn new(l: f64, nb: usize, nf: usize, n: usize) -> Self {
        Self {
            l,
            nb,
            nf,
            n,
            warp: None,
            warp_samples: None,
            potential: None,
            connection_x: None,
            connection_y: None,
            perturbation: None,
        }
    }

    pub fn warp(mut self, f: impl Fn(f64) -> f64 + 'static) -> Self {
        self.warp = Some(Box::new(f));
        self
    }

    pub fn warp_samples(mut self, samples: Vec<f64>) -> Self {
        self.warp_samples = Some(samples);
        self
    }

    pub fn potential(mut self, f: impl Fn(f64, f64) -> SmallMatrix + 'static) -> Self {
        self.potential = Some(Box::new(f));
        self
    }

    pub fn connection_x(mut self, f: impl Fn(f64, f64) -> SmallMatrix + 'static) -> Self {
        self.connection_x = Some(Box::new(f));
        self
    }

    pub fn connection_y(mut self, f: impl Fn(f64, f64) -> SmallMatrix + 'static) -> Self {
        self.connection_y = Some(Box::new(f));
        self
    }

    pub fn perturbation(
        mut self,
        kind: PerturbationKind,
        derivative: impl Fn(f64, f64) -> SmallMatrix + 'static,
        zeroth: impl Fn(f64, f64) -> SmallMatrix + 'static,
    ) -> Self {
        self.perturbation = Some((kind, Box::new(derivative), Box::new(zeroth)));
        self
    }

    pub fn build(self) -> Result<BundleModel, ModelError> {
        let model = self.build_unchecked()?;
        model.check()?;
        Ok(model)
    }

    /// Samples the fields without checking the model invariants, for diagnostics.
    pub fn build_unchecked(self) -> Result<BundleModel, ModelError> {
        check_resolution(self.nb, self.nf, self.n)?;
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(ModelError::Circumference(self.l));
        }
        let (nb, nf, n) = (self.nb, self.nf, self.n);
        let hx = self.l / nb as f64;
        let hy = 1.0 / nf as f64;
        let warp = match (self.warp_samples, self.warp) {
            (Some(s), _) => s,
            (None, Some(f)) => (0..nb).map(|i| f(i as f64 * hx)).collect(),
            (None, None) => vec![1.0; nb],
        };
        let sample = |f: &Option<FieldFn>, ny: usize, dx: f64, dy: f64| match f {
            Some(f) => MatrixField::from_fn(nb, ny, n, |i, j| {
                f((i as f64 + dx) * hx, (j as f64 + dy) * hy)
            }),
            None => MatrixField::zeros(nb, ny, n),
        };
        let potential = sample(&self.potential, nf + 1, 0.0, 0.0);
        let connection_x = sample(&self.connection_x, nf + 1, 0.5, 0.0);
        let connection_y = sample(&self.connection_y, nf, 0.0, 0.5);
        let perturbation = match self.perturbation {
            None => PerturbationSpec::zero(nb, nf + 1, n),
            Some((kind, b, c)) => PerturbationSpec {
                kind,
                derivative: sample(&Some(b), nf + 1, 0.0, 0.0),
                zeroth: sample(&Some(c), nf + 1, 0.0, 0.0),
            },
        };
        let model = BundleModel {
            base_circumference: self.l,
            base_points: nb,
            fibre_points: nf,
            rank: n,
            warp,
            potential,
            connection_x,
            connection_y,
            perturbation,
        };
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticCheck {
    pub name: String,
    pub passed: bool,
    pub worst_violation: f64,
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<DiagnosticCheck>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &DiagnosticCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks every model invariant and reports the worst violation of each.
pub fn validate_model(model: &BundleModel) -> DiagnosticsReport {
    let mut checks = Vec::new();
    let res = check_resolution(model.base_points, model.fibre_points, model.rank);
    checks.push(DiagnosticCheck {
        name: "resolution".into(),
        passed: res.is_ok(),
        worst_violation: if res.is_ok() { 0.0 } else { 1.0 },
        location: res.err().map(|e| e.to_string()),
    });
    let l = model.base_circumference;
    let l_ok = l > 0.0 && l.is_finite();
    checks.push(DiagnosticCheck {
        name: "base_circumference_positive".into(),
        passed: l_ok,
        worst_violation: if l_ok { 0.0 } else { (-l).max(0.0) },
        location: None,
    });

    let nb = model.base_points;
    let nf = model.fibre_points;
    let n = model.rank;
    let shapes = [
        ("warp", model.warp.len() == nb),
        (
            "potential",
            model
                .potential
                .check_shape("potential", nb, nf + 1, n)
                .is_ok(),
        ),
        (
            "connection_x",
            model
                .connection_x
                .check_shape("connection_x", nb, nf + 1, n)
                .is_ok(),
        ),
        (
            "connection_y",
            model
                .connection_y
                .check_shape("connection_y", nb, nf, n)
                .is_ok(),
        ),
        (
            "perturbation",
            model
                .perturbation
                .derivative
                .check_shape("d", nb, nf + 1, n)
                .is_ok()
                && model
                    .perturbation
                    .zeroth
                    .check_shape("z", nb, nf + 1, n)
                    .is_ok(),
        ),
    ];
    let bad_shape: Vec<&str> = shapes.iter().filter(|s| !s.1).map(|s| s.0).collect();
    checks.push(DiagnosticCheck {
        name: "field_shapes".into(),
        passed: bad_shape.is_empty(),
        worst_violation: bad_shape.len() as f64,
        location: (!bad_shape.is_empty()).then(|| bad_shape.join(", ")),
    });

    // Positivity: the violation is how far f dips below the tolerance.
    let mut worst = (0.0f64, None);
    for (i, &f) in model.warp.iter().enumerate() {
        let v = if f.is_finite() {
            (FIELD_TOLERANCE - f).max(0.0)
        } else {
            f64::INFINITY
        };
        if v > worst.0 {
            worst = (v, Some(format!("x_index={i}, x={}, f={f}", model.x(i))));
        }
    }
    checks.push(DiagnosticCheck {
        name: "warp_positive".into(),
        passed: worst.0 == 0.0,
        worst_violation: worst.0,
        location: worst.1,
    });

    for (name, field) in model.fields() {
        let finite = field.data.iter().all(SmallMatrix::is_finite);
        checks.push(DiagnosticCheck {
            name: format!("{name}_finite"),
            passed: finite,
            worst_violation: if finite { 0.0 } else { f64::INFINITY },
            location: None,
        });
    }
    for (name, field, property, defect) in model.symmetry_checks() {
        let (d, i, j) = field.worst(defect);
        checks.push(DiagnosticCheck {
            name: format!("{name}_{}", property.to_lowercase().replace('-', "_")),
            passed: d <= FIELD_TOLERANCE,
            worst_violation: d,
            location: Some(format!("x_index={i}, y_index={j}")),
        });
    }
    DiagnosticsReport { checks }
}

/// Changes the bundle frame by the unitary node field `g` (N_B × (N_F+1)).
///
/// Links transform as `U ↦ g_a U g_b†` along an edge a → b and the connection
/// samples are replaced by the principal logarithm of the new links, so the
/// assembled operators conjugate exactly by the block-diagonal lift of g.
pub fn gauge_transform(model: &BundleModel, g: &MatrixField) -> Result<BundleModel, ModelError> {
    let (nb, nf, n) = (model.base_points, model.fibre_points, model.rank);
    g.check_shape("gauge field", nb, nf + 1, n)?;
    let (d, i, j) = g.worst(SmallMatrix::unitarity_defect);
    if d > FIELD_TOLERANCE || d.is_nan() {
        return Err(ModelError::NonUnitaryGauge {
            x_index: i,
            y_index: j,
            defect: d,
        });
    }
    let id = SmallMatrix::identity(n);
    for i in 0..nb {
        for j in [0, nf] {
            if (g.at(i, j) - &id).max_abs() > FIELD_TOLERANCE {
                return Err(ModelError::GaugeNotIdentityAtEnds { x_index: i });
            }
        }
    }
    let grid = model.grid();
    let conj = |f: &MatrixField| {
        MatrixField::from_fn(f.nx, f.ny, n, |i, j| {
            let gm = g.at(i, j);
            (&(gm * f.at(i, j)) * &gm.adjoint()).hermitian_part()
        })
    };
    let connection_x = MatrixField::from_fn(nb, nf + 1, n, |i, j| {
        let u = model.link_x(i, j);
        let u2 = &(g.at(i, j) * &u) * &g.at(grid.next(i), j).adjoint();
        u2.log_unitary().scale_re(1.0 / grid.hx)
    });
    let connection_y = MatrixField::from_fn(nb, nf, n, |i, j| {
        let u = model.link_y(i, j);
        let u2 = &(g.at(i, j) * &u) * &g.at(i, j + 1).adjoint();
        u2.log_unitary().scale_re(1.0 / grid.hy)
    });
    let out = BundleModel {
        potential: conj(&model.potential),
        connection_x,
        connection_y,
        perturbation: PerturbationSpec {
            kind: model.perturbation.kind,
            derivative: conj(&model.perturbation.derivative),
            zeroth: conj(&model.perturbation.zeroth),
        },
        ..model.clone()
    };
    Ok(out)
}
