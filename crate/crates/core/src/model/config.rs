//! JSON model configuration. Fields are sums of separable terms
//! `M · X(x) · Y(y)` with a constant matrix M and named profiles.

use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use super::{BundleModel, ModelError, PerturbationKind};
use crate::small::SmallMatrix;

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub base_circumference: f64,
    pub base_points: usize,
    pub fibre_points: usize,
    #[serde(default = "one_usize")]
    pub rank: usize,
    pub warp: WarpConfig,
    #[serde(default)]
    pub potential: Vec<FieldTerm>,
    #[serde(default)]
    pub connection_x: Vec<FieldTerm>,
    #[serde(default)]
    pub connection_y: Vec<FieldTerm>,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum WarpConfig {
    Constant {
        value: f64,
    },
    /// offset + amplitude·sin(2π·harmonic·x/L)
    Sin {
        amplitude: f64,
        harmonic: f64,
        #[serde(default = "one")]
        offset: f64,
    },
    /// One value per base node, or N_B + 1 values with the last repeating the first.
    Samples {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum XProfile {
    #[default]
    Constant,
    /// cos(2π·harmonic·x/L)
    Cos { harmonic: f64 },
    /// sin(2π·harmonic·x/L)
    Sin { harmonic: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum YProfile {
    #[default]
    Constant,
    /// sin(mode·π·y)
    Sin { mode: f64 },
    /// cos(mode·π·y)
    Cos { mode: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTerm {
    /// Row-major real part of the n×n coefficient matrix.
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub x: XProfile,
    #[serde(default)]
    pub y: YProfile,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationConfig {
    #[default]
    Zero,
    FirstOrder {
        #[serde(default)]
        derivative: Vec<FieldTerm>,
        #[serde(default)]
        zeroth: Vec<FieldTerm>,
    },
    SecondOrder {
        #[serde(default)]
        derivative: Vec<FieldTerm>,
        #[serde(default)]
        zeroth: Vec<FieldTerm>,
    },
}

fn check_harmonic(what: &str, k: f64) -> Result<(), ModelError> {
    if !k.is_finite() || (k - k.round()).abs() > 1e-12 {
        return Err(ModelError::NonPeriodic(format!("{what} with harmonic {k}")));
    }
    Ok(())
}

impl XProfile {
    fn check(&self, what: &str) -> Result<(), ModelError> {
        match self {
            XProfile::Constant => Ok(()),
            XProfile::Cos { harmonic } | XProfile::Sin { harmonic } => {
                check_harmonic(what, *harmonic)
            }
        }
    }

    fn eval(&self, x: f64, l: f64) -> f64 {
        match *self {
            XProfile::Constant => 1.0,
            XProfile::Cos { harmonic } => (2.0 * PI * harmonic * x / l).cos(),
            XProfile::Sin { harmonic } => (2.0 * PI * harmonic * x / l).sin(),
        }
    }
}

impl YProfile {
    fn eval(&self, y: f64) -> f64 {
        match *self {
            YProfile::Constant => 1.0,
            YProfile::Sin { mode } => (mode * PI * y).sin(),
            YProfile::Cos { mode } => (mode * PI * y).cos(),
        }
    }
}

/// Compiled field: matrices with their profiles.
struct Terms {
    terms: Vec<(SmallMatrix, XProfile, YProfile)>,
    rank: usize,
    l: f64,
}

impl Terms {
    fn compile(what: &str, terms: &[FieldTerm], rank: usize, l: f64) -> Result<Self, ModelError> {
        let mut out = Vec::with_capacity(terms.len());
        for (k, t) in terms.iter().enumerate() {
            let m = SmallMatrix::from_parts(&t.re, t.im.as_deref()).ok_or_else(|| {
                ModelError::Shape(format!("{what}[{k}] coefficient is not square"))
            })?;
            if m.dim() != rank {
                return Err(ModelError::Shape(format!(
                    "{what}[{k}] is {0}×{0}, expected {rank}×{rank}",
                    m.dim()
                )));
            }
            t.x.check(&format!("{what}[{k}]"))?;
            out.push((m, t.x.clone(), t.y.clone()));
        }
        Ok(Self {
            terms: out,
            rank,
            l,
        })
    }

    fn eval(&self, x: f64, y: f64) -> SmallMatrix {
        let mut acc = SmallMatrix::zeros(self.rank);
        for (m, xp, yp) in &self.terms {
            acc = &acc + &m.scale(c64::new(xp.eval(x, self.l) * yp.eval(y), 0.0));
        }
        acc
    }
}

/// Parses and samples a configuration into a validated model.
pub fn build_model(config: &ModelConfig) -> Result<BundleModel, ModelError> {
    builder_for(config)?.build()
}

/// Samples a configuration without checking invariants; feed the result to
/// [`super::validate_model`] to see every violation at once.
pub fn sample_model(config: &ModelConfig) -> Result<BundleModel, ModelError> {
    builder_for(config)?.build_unchecked()
}

fn builder_for(config: &ModelConfig) -> Result<super::ModelBuilder, ModelError> {
    let l = config.base_circumference;
    let nb = config.base_points;
    let n = config.rank;
    let mut b = BundleModel::builder(l, nb, config.fibre_points, n);
    b = match &config.warp {
        WarpConfig::Constant { value } => b.warp_samples(vec![*value; nb]),
        WarpConfig::Sin {
            amplitude,
            harmonic,
            offset,
        } => {
            check_harmonic("warp", *harmonic)?;
            let (a, k, o) = (*amplitude, *harmonic, *offset);
            b.warp(move |x| o + a * (2.0 * PI * k * x / l).sin())
        }
        WarpConfig::Samples { values } => {
            let samples = if values.len() == nb + 1 {
                let (first, last) = (values[0], values[nb]);
                if (first - last).abs() > super::FIELD_TOLERANCE * first.abs().max(1.0) {
                    return Err(ModelError::NonPeriodic(format!(
                        "warp samples: first {first} and last {last} differ"
                    )));
                }
                values[..nb].to_vec()
            } else if values.len() == nb {
                values.clone()
            } else {
                return Err(ModelError::Shape(format!(
                    "warp samples must have {nb} or {} values, got {}",
                    nb + 1,
                    values.len()
                )));
            };
            b.warp_samples(samples)
        }
    };
    let v = Terms::compile("potential", &config.potential, n, l)?;
    let ax = Terms::compile("connection_x", &config.connection_x, n, l)?;
    let ay = Terms::compile("connection_y", &config.connection_y, n, l)?;
    b = b
        .potential(move |x, y| v.eval(x, y))
        .connection_x(move |x, y| ax.eval(x, y))
        .connection_y(move |x, y| ay.eval(x, y));
    let (kind, der, zer) = match &config.perturbation {
        PerturbationConfig::Zero => (PerturbationKind::Zero, &[][..], &[][..]),
        PerturbationConfig::FirstOrder { derivative, zeroth } => {
            (PerturbationKind::FirstOrder, &derivative[..], &zeroth[..])
        }
        PerturbationConfig::SecondOrder { derivative, zeroth } => {
            (PerturbationKind::SecondOrder, &derivative[..], &zeroth[..])
        }
    };
    if kind != PerturbationKind::Zero {
        let d = Terms::compile("perturbation.derivative", der, n, l)?;
        let z = Terms::compile("perturbation.zeroth", zer, n, l)?;
        b = b.perturbation(kind, move |x, y| d.eval(x, y), move |x, y| z.eval(x, y));
    }
    Ok(b)
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Config(e.to_string()))
    }
}
