//! Sweep configuration.

use std::path::{Path, PathBuf};

use adiabat_core::bands::BandSelector;
use adiabat_core::{build_model, BundleModel, CutoffSpec, ModelConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_SWEEP_POINTS: usize = 4;
pub const MAX_SWEEP_EPSILON: f64 = 0.25;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {what}: {source}")]
    Parse {
        what: String,
        source: serde_json::Error,
    },
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] adiabat_core::ModelError),
}

/// The rate and exactness statements a sweep can check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    /// ‖[H, P^N] χ(H)‖ = O(ε^{N+1})
    Commutator,
    /// ‖(P^N)² − P^N‖ = O(ε^{N+1})
    ProjectionDefect,
    /// P_ε² = P_ε = P_ε† to round-off, rank N_B·m
    ProjectionExactness,
    /// ‖P_ε − P_0‖ = O(ε)
    ProjectionCloseness,
    /// ‖(P_ε − P_0 − Σ_{k≤ℓ} ΔP_k) χ(H)‖ = O(ε^{ℓ+1}), ℓ ≤ N
    Expansion,
    /// worst dist(μ, σ(H)) over μ ∈ σ(H_eff), μ ≤ Λ − δ: O(ε^{N+1})
    SpectralDistance,
    /// ‖U† H χ(H) U − H_eff χ(H_eff)‖ = O(ε^{N+1}), ground band only
    UnitaryEquivalence,
    /// ‖H_eff χ²(H_eff) − χ(H_eff)(H_a + M)χ(H_eff)‖ = O(ε³)
    EffectiveExpansion,
}

impl Claim {
    pub const ALL: [Claim; 8] = [
        Claim::Commutator,
        Claim::ProjectionDefect,
        Claim::ProjectionExactness,
        Claim::ProjectionCloseness,
        Claim::Expansion,
        Claim::SpectralDistance,
        Claim::UnitaryEquivalence,
        Claim::EffectiveExpansion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Claim::Commutator => "commutator",
            Claim::ProjectionDefect => "projection_defect",
            Claim::ProjectionExactness => "projection_exactness",
            Claim::ProjectionCloseness => "projection_closeness",
            Claim::Expansion => "expansion",
            Claim::SpectralDistance => "spectral_distance",
            Claim::UnitaryEquivalence => "unitary_equivalence",
            Claim::EffectiveExpansion => "effective_expansion",
        }
    }
}

/// Either a path to a model JSON (relative to the sweep file) or the model inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(Box<ModelConfig>),
}

fn default_claims() -> Vec<Claim> {
    Claim::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelSource,
    #[serde(default)]
    pub band: BandSelector,
    pub depth: usize,
    /// Strictly decreasing, at least four points, all ≤ 1/4.
    pub epsilons: Vec<f64>,
    /// Overrides the default Λ between the band and the next one, w = δ/2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffSpec>,
    #[serde(default = "default_claims")]
    pub claims: Vec<Claim>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            what: "sweep config".into(),
            source,
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a sweep file; a model path inside it is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let mut cfg = Self::from_json(&text)?;
        if let ModelSource::Path(p) = &cfg.model {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.model = ModelSource::Path(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let e = &self.epsilons;
        if e.len() < MIN_SWEEP_POINTS {
            return Err(ConfigError::Invalid(format!(
                "need at least {MIN_SWEEP_POINTS} epsilons, got {}",
                e.len()
            )));
        }
        if let Some(bad) = e.iter().find(|&&v| !(v > 0.0 && v <= MAX_SWEEP_EPSILON)) {
            return Err(ConfigError::Invalid(format!(
                "epsilon {bad} outside (0, {MAX_SWEEP_EPSILON}]"
            )));
        }
        if e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ConfigError::Invalid(
                "epsilons must be strictly decreasing".into(),
            ));
        }
        if self.depth > adiabat_core::superadiabatic::MAX_DEPTH {
            return Err(ConfigError::Invalid(format!(
                "depth {} exceeds {}",
                self.depth,
                adiabat_core::superadiabatic::MAX_DEPTH
            )));
        }
        if self.claims.is_empty() {
            return Err(ConfigError::Invalid("no claims requested".into()));
        }
        if self.band.index == 0 || self.band.multiplicity == 0 {
            return Err(ConfigError::Invalid(
                "band index and multiplicity are 1-based and positive".into(),
            ));
        }
        Ok(())
    }

    pub fn model_config(&self) -> Result<ModelConfig, ConfigError> {
        match &self.model {
            ModelSource::Inline(m) => Ok((**m).clone()),
            ModelSource::Path(p) => load_model_config(p),
        }
    }

    pub fn build_model(&self) -> Result<BundleModel, ConfigError> {
        Ok(build_model(&self.model_config()?)?)
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_model_config(path: &Path) -> Result<ModelConfig, ConfigError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        what: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<BundleModel, ConfigError> {
    Ok(build_model(&load_model_config(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "model": {
                "base_circumference": 6.283185307179586,
                "base_points": 16,
                "fibre_points": 8,
                "warp": {"preset": "constant", "value": 1.0}
            },
            "depth": 1,
            "epsilons": [0.125, 0.0625, 0.03125, 0.015625]
        })
    }

    #[test]
    fn defaults_fill_band_and_claims() {
        let cfg = SweepConfig::from_json(&base().to_string()).unwrap();
        assert_eq!(
            cfg.band,
            BandSelector {
                index: 1,
                multiplicity: 1
            }
        );
        assert_eq!(cfg.claims.len(), Claim::ALL.len());
        assert!(cfg.build_model().is_ok());
    }

    #[test]
    fn rejects_bad_grids() {
        for eps in [
            serde_json::json!([0.125, 0.0625, 0.03125]),
            serde_json::json!([0.5, 0.125, 0.0625, 0.03125]),
            serde_json::json!([0.125, 0.125, 0.0625, 0.03125]),
            serde_json::json!([0.0625, 0.125, 0.03125, 0.015625]),
        ] {
            let mut v = base();
            v["epsilons"] = eps;
            assert!(matches!(
                SweepConfig::from_json(&v.to_string()),
                Err(ConfigError::Invalid(_))
            ));
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut v = base();
        v["colour"] = serde_json::json!("red");
        assert!(matches!(
            SweepConfig::from_json(&v.to_string()),
            Err(ConfigError::Parse { .. })
        ));
    }
}
