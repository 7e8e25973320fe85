//! Adiabatic-limit machinery for discretized fibre bundles.
//!
//! A [`model::BundleModel`] describes a warped circle × interval bundle with
//! a rank-n potential, a connection and an optional perturbation.
//! [`discretize`] assembles `H(ε) = ε²(−Δ_H) + εH_1 + blockdiag(H^F)`,
//! [`bands`] tracks and certifies a gapped eigenband and builds `P_0`, and
//! [`superadiabatic`] runs the recursion for `P^N`, the Nenciu projection
//! `P_ε`, the intertwiner `U_ε` and the effective operators.

pub mod bands;
pub mod calculus;
pub mod discretize;
pub mod linalg;
pub mod model;
pub mod small;
pub mod superadiabatic;

pub use bands::{
    band_projection, certify_gap, prepare_band, reduced_resolvent, solve_fibre_spectra, track_band,
    BandData, BandError, BandProjection, BandSelector, BandSummary, Eigenband, FibreSpectra,
    GapCertificate,
};
pub use calculus::{
    apply_function, eig_hermitian, operator_norm, smooth_cutoff, CalculusError, Cutoff,
    CutoffShape, CutoffSpec, SpectralDecomposition, SpectralFunction,
};
pub use discretize::{
    assemble_fibre_operator, assemble_full, assemble_horizontal_laplacian, assemble_perturbation,
    assemble_splitting, sobolev_norm, DiscreteOperator, DiscretizeError, FibreOperator,
    OperatorLabel, RawOperator, Splitting,
};
pub use model::{
    build_model, gauge_transform, sample_model, validate_model, BundleModel, DiagnosticsReport,
    ModelConfig, ModelError,
};
pub use small::SmallMatrix;
pub use superadiabatic::{
    adiabatic_operator, build_pn, commutator_norm, effective_operator, intertwiner,
    second_order_correction, smooth_cutoff_projection, superadiabatic_step, EffectiveOperator,
    Intertwiner, ProjectionStack, SuperadiabaticError,
};

pub use faer::{c64, Mat, MatRef};

use thiserror::Error;

/// Any failure of the pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Band(#[from] BandError),
    #[error(transparent)]
    Superadiabatic(#[from] SuperadiabaticError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}
