//! Lowest eigenvalues of H, H_a and H_eff side by side.

use adiabat_core::bands::{prepare_band, BandSelector};
use adiabat_core::calculus::{eigvals_hermitian, smooth_cutoff, CutoffSpec};
use adiabat_core::superadiabatic::{adiabatic_operator, build_pn, effective_operator};
use adiabat_core::{assemble_full, BundleModel};
use serde::{Deserialize, Serialize};

use crate::sweep::{default_cutoff, SweepError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub k: usize,
    pub h: f64,
    pub h_a: Option<f64>,
    pub h_eff: Option<f64>,
    pub dist_h_ha: Option<f64>,
    pub dist_h_heff: Option<f64>,
    pub dist_ha_heff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub epsilon: f64,
    pub depth: usize,
    pub requested: usize,
    pub rows: Vec<SpectrumRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub band: BandSelector,
    pub depth: usize,
    pub cutoff: Option<CutoffSpec>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            band: BandSelector::default(),
            depth: 2,
            cutoff: None,
        }
    }
}

/// The `count` lowest eigenvalues of each operator; counts beyond an
/// operator's dimension are clipped with a warning.
pub fn spectrum_command(
    model: &BundleModel,
    eps: f64,
    count: usize,
    opts: SpectrumOptions,
) -> Result<SpectrumTable, SweepError> {
    let band = prepare_band(model, opts.band)?;
    let cutoff = smooth_cutoff(opts.cutoff.unwrap_or_else(|| default_cutoff(&band)))?;
    let h = assemble_full(model, eps)?;
    let h_dense = h.to_dense();
    let spectrum = adiabat_core::eig_hermitian(h_dense.as_ref())?;
    let ha = adiabatic_operator(&band.projection, &h).map_err(adiabat_core::Error::from)?;
    let stack = build_pn(&band.projection, &h, &band.resolvent, opts.depth, eps)
        .and_then(|s| s.complete(&spectrum, &cutoff))
        .map_err(adiabat_core::Error::from)?;
    let heff = effective_operator(&stack, &h).map_err(adiabat_core::Error::from)?;
    let mu_a = eigvals_hermitian(ha.matrix.as_ref())?;
    let mu_eff = eigvals_hermitian(heff.matrix.as_ref())?;

    let mut warnings = Vec::new();
    let d = spectrum.values.len();
    let shown = count.min(d);
    if count > d {
        warnings.push(format!(
            "count {count} exceeds the dimension {d} of H; clipped"
        ));
    }
    if shown > mu_a.len() {
        warnings.push(format!(
            "H_a and H_eff have dimension {}; later rows list H only",
            mu_a.len()
        ));
    }
    let rows = (0..shown)
        .map(|k| {
            let hv = spectrum.values[k];
            let a = mu_a.get(k).copied();
            let e = mu_eff.get(k).copied();
            SpectrumRow {
                k,
                h: hv,
                h_a: a,
                h_eff: e,
                dist_h_ha: a.map(|a| (a - hv).abs()),
                dist_h_heff: e.map(|e| (e - hv).abs()),
                dist_ha_heff: a.zip(e).map(|(a, e)| (a - e).abs()),
            }
        })
        .collect();
    Ok(SpectrumTable {
        epsilon: eps,
        depth: opts.depth,
        requested: count,
        rows,
        warnings,
    })
}
