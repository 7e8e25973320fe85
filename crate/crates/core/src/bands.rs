//! Fibre spectra, eigenband tracking, gap certificates, the band projection
//! P_0 and the reduced resolvent.

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{distance_to_sorted, eig_hermitian, CalculusError};
use crate::discretize::{
    assemble_fibre_operator, BlockDiagonal, DiscreteOperator, OperatorLabel, Storage,
};
use crate::linalg;
use crate::model::BundleModel;

/// Relative tolerance for grouping eigenvalues into one cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-8;
/// Minimum subspace overlap accepted between neighbouring base points.
pub const OVERLAP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BandError {
    #[error("fibre eigensolve failed at x_index {x_index}: {source}")]
    Eigensolver {
        x_index: usize,
        source: CalculusError,
    },
    #[error("invalid band selector: {0}")]
    Selector(String),
    #[error("band cluster at x_index {x_index} is not degenerate: spread {spread:e}")]
    ClusterMismatch { x_index: usize, spread: f64 },
    #[error("subspace overlap ambiguous at x_index {x_index}: overlap {overlap:.4}{}", competing.map(|c| format!(", window starting at {c} overlaps more")).unwrap_or_default())]
    OverlapAmbiguity {
        x_index: usize,
        overlap: f64,
        competing: Option<usize>,
    },
    #[error("band does not close around the base: overlap {overlap:.4}")]
    ClosureFailure { overlap: f64 },
    #[error("gap too small: delta {delta:e} below threshold {threshold:e}")]
    GapTooSmall { delta: f64, threshold: f64 },
    #[error("the band has no spectral neighbours to certify a gap against")]
    NoSpectralNeighbour,
    #[error("band is not certified")]
    Uncertified,
    #[error("reduced resolvent singular at x_index {x_index}: eigenvalue within {distance:e} of the band")]
    SingularReducedResolvent { x_index: usize, distance: f64 },
}

/// Ascending eigenvalues and orthonormal eigenvectors of every H^F(x_i).
#[derive(Debug, Clone)]
pub struct FibreSpectra {
    pub values: Vec<Vec<f64>>,
    pub vectors: Vec<Mat<c64>>,
}

impl FibreSpectra {
    pub fn base_points(&self) -> usize {
        self.values.len()
    }

    pub fn block(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

pub fn solve_fibre_spectra(model: &BundleModel) -> Result<FibreSpectra, BandError> {
    let parts: Vec<(Vec<f64>, Mat<c64>)> = (0..model.base_points)
        .into_par_iter()
        .map(|i| {
            let op = assemble_fibre_operator(model, i).expect("index in range");
            let e = eig_hermitian(op.matrix.as_ref())
                .map_err(|source| BandError::Eigensolver { x_index: i, source })?;
            Ok((e.values, e.vectors))
        })
        .collect::<Result<_, BandError>>()?;
    let (values, vectors) = parts.into_iter().unzip();
    Ok(FibreSpectra { values, vectors })
}

/// Band chosen by its 1-based position in the spectrum at x_0 and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSelector {
    pub index: usize,
    #[serde(default = "one")]
    pub multiplicity: usize,
}

fn one() -> usize {
    1
}

impl Default for BandSelector {
    fn default() -> Self {
        Self {
            index: 1,
            multiplicity: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub delta: f64,
    pub f_minus: Vec<f64>,
    pub f_plus: Vec<f64>,
    /// λ(x) − next eigenvalue below, when there is one.
    pub gap_below: Vec<Option<f64>>,
    /// next eigenvalue above − λ(x), when there is one.
    pub gap_above: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct Eigenband {
    pub selector: BandSelector,
    /// 0-based position of the band's first member in every fibre spectrum.
    pub start: usize,
    pub multiplicity: usize,
    pub lambda: Vec<f64>,
    pub frames: Vec<Mat<c64>>,
    /// Overlap accepted at each step x_i → x_{i+1}; the last entry is the closure step.
    pub overlaps: Vec<f64>,
    /// Frame at x_0 after transport once around the base, in the starting frame.
    pub holonomy: Mat<c64>,
    pub certificate: Option<GapCertificate>,
}

impl Eigenband {
    pub fn with_certificate(mut self, c: GapCertificate) -> Self {
        self.certificate = Some(c);
        self
    }

    pub fn min_overlap(&self) -> f64 {
        self.overlaps.iter().copied().fold(1.0, f64::min)
    }
}

/// Polar factor of a small square matrix: the closest unitary.
fn polar(m: MatRef<'_, c64>) -> Mat<c64> {
    if m.nrows() == 1 {
        let z = m[(0, 0)];
        let r = z.norm();
        return Mat::from_fn(
            1,
            1,
            |_, _| if r > 0.0 { z / r } else { c64::new(1.0, 0.0) },
        );
    }
    let svd = m.svd().expect("SVD of a small matrix");
    svd.U() * svd.V().adjoint()
}

/// Overlap of `frame` with every window of `m` consecutive eigenvectors.
fn window_overlaps(frame: MatRef<'_, c64>, vectors: MatRef<'_, c64>, m: usize) -> Vec<f64> {
    let o = frame.adjoint() * vectors;
    let weights: Vec<f64> = (0..o.ncols())
        .map(|k| (0..o.nrows()).map(|r| o[(r, k)].norm_sqr()).sum())
        .collect();
    (0..=weights.len() - m)
        .map(|t| weights[t..t + m].iter().sum::<f64>() / m as f64)
        .collect()
}

/// Rotates the window `start..start+m` of `vectors` to align with `prev`.
fn step(
    prev: MatRef<'_, c64>,
    vectors: MatRef<'_, c64>,
    start: usize,
    m: usize,
    x_index: usize,
) -> Result<(Mat<c64>, f64), BandError> {
    let overlaps = window_overlaps(prev, vectors, m);
    let own = overlaps[start];
    let rival = overlaps
        .iter()
        .enumerate()
        .filter(|&(t, &o)| t != start && o > own)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(t, _)| t);
    if own < OVERLAP_THRESHOLD || rival.is_some() {
        return Err(BandError::OverlapAmbiguity {
            x_index,
            overlap: own,
            competing: rival,
        });
    }
    let v = vectors.subcols(start, m);
    let w = polar((v.adjoint() * prev).as_ref());
    Ok((v * w, own))
}

/// Follows the selected band around the base by subspace overlap.
pub fn track_band(spectra: &FibreSpectra, selector: BandSelector) -> Result<Eigenband, BandError> {
    let b = spectra.block();
    let m = selector.multiplicity;
    if selector.index == 0 || m == 0 || selector.index - 1 + m > b {
        return Err(BandError::Selector(format!(
            "index {} with multiplicity {m} does not fit a fibre spectrum of size {b}",
            selector.index
        )));
    }
    let s = selector.index - 1;
    let nb = spectra.base_points();
    let mut lambda = Vec::with_capacity(nb);
    for (i, vals) in spectra.values.iter().enumerate() {
        let w = &vals[s..s + m];
        let spread = w[m - 1] - w[0];
        let scale = w.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if spread > CLUSTER_TOLERANCE * scale {
            return Err(BandError::ClusterMismatch { x_index: i, spread });
        }
        lambda.push(w.iter().sum::<f64>() / m as f64);
    }
    let mut frames = vec![spectra.vectors[0].subcols(s, m).to_owned()];
    let mut overlaps = Vec::with_capacity(nb);
    for i in 1..nb {
        let (f, o) = step(frames[i - 1].as_ref(), spectra.vectors[i].as_ref(), s, m, i)?;
        frames.push(f);
        overlaps.push(o);
    }
    let (back, o) = step(
        frames[nb - 1].as_ref(),
        spectra.vectors[0].as_ref(),
        s,
        m,
        0,
    )
    .map_err(|e| match e {
        BandError::OverlapAmbiguity { overlap, .. } => BandError::ClosureFailure { overlap },
        other => other,
    })?;
    overlaps.push(o);
    let holonomy = frames[0].adjoint() * &back;
    Ok(Eigenband {
        selector,
        start: s,
        multiplicity: m,
        lambda,
        frames,
        overlaps,
        holonomy,
        certificate: None,
    })
}

pub fn default_gap_threshold(band: &Eigenband) -> f64 {
    1e-8 * band.lambda.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

pub fn certify_gap(band: &Eigenband, spectra: &FibreSpectra) -> Result<GapCertificate, BandError> {
    certify_gap_with_threshold(band, spectra, default_gap_threshold(band))
}

/// f_± are the midpoints to the nearest neighbours (mirrored when one side is
/// missing); δ is half the smallest distance from f_± to the spectrum.
pub fn certify_gap_with_threshold(
    band: &Eigenband,
    spectra: &FibreSpectra,
    threshold: f64,
) -> Result<GapCertificate, BandError> {
    let (s, m) = (band.start, band.multiplicity);
    let nb = spectra.base_points();
    let mut cert = GapCertificate {
        delta: f64::INFINITY,
        f_minus: Vec::with_capacity(nb),
        f_plus: Vec::with_capacity(nb),
        gap_below: Vec::with_capacity(nb),
        gap_above: Vec::with_capacity(nb),
    };
    for i in 0..nb {
        let vals = &spectra.values[i];
        let lam = band.lambda[i];
        let below = (s > 0).then(|| lam - vals[s - 1]);
        let above = (s + m < vals.len()).then(|| vals[s + m] - lam);
        let (lo, hi) = match (below, above) {
            (Some(b), Some(a)) => (b, a),
            (Some(b), None) => (b, b),
            (None, Some(a)) => (a, a),
            (None, None) => return Err(BandError::NoSpectralNeighbour),
        };
        let (fm, fp) = (lam - 0.5 * lo, lam + 0.5 * hi);
        let dist = distance_to_sorted(vals, fm).min(distance_to_sorted(vals, fp));
        cert.delta = cert.delta.min(0.5 * dist);
        cert.f_minus.push(fm);
        cert.f_plus.push(fp);
        cert.gap_below.push(below);
        cert.gap_above.push(above);
    }
    if !(cert.delta >= threshold) {
        return Err(BandError::GapTooSmall {
            delta: cert.delta,
            threshold,
        });
    }
    Ok(cert)
}

/// P_0 with the frame E that identifies ran(P_0) with the coefficient space:
/// column i·m + c of E carries frame(x_i)[:, c] in block i.
#[derive(Debug, Clone)]
pub struct BandProjection {
    pub operator: DiscreteOperator,
    pub frame: Mat<c64>,
    pub multiplicity: usize,
}

impl BandProjection {
    pub fn rank(&self) -> usize {
        self.frame.ncols()
    }

    pub fn blocks(&self) -> &BlockDiagonal {
        match self.operator.storage() {
            Storage::BlockDiagonal(b) => b,
            _ => unreachable!("band projection is block diagonal"),
        }
    }
}

pub fn band_projection(band: &Eigenband) -> Result<BandProjection, BandError> {
    if band.certificate.is_none() {
        return Err(BandError::Uncertified);
    }
    let m = band.multiplicity;
    let b = band.frames[0].nrows();
    let nb = band.frames.len();
    let blocks = band
        .frames
        .iter()
        .map(|f| linalg::symmetrize((f * f.adjoint()).as_ref()))
        .collect();
    let mut frame = Mat::<c64>::zeros(nb * b, nb * m);
    for (i, f) in band.frames.iter().enumerate() {
        frame
            .as_mut()
            .submatrix_mut(i * b, i * m, b, m)
            .copy_from(f);
    }
    let operator = DiscreteOperator::new(
        Storage::BlockDiagonal(BlockDiagonal::new(blocks)),
        OperatorLabel::Projection,
        None,
    )
    .expect("frame projectors are Hermitian");
    Ok(BandProjection {
        operator,
        frame,
        multiplicity: m,
    })
}

/// R = Σ_{μ ∉ band} (μ − λ(x))^{-1} v v† per block.
pub fn reduced_resolvent(
    band: &Eigenband,
    spectra: &FibreSpectra,
) -> Result<DiscreteOperator, BandError> {
    let cert = band.certificate.as_ref().ok_or(BandError::Uncertified)?;
    let (s, m) = (band.start, band.multiplicity);
    let blocks = (0..spectra.base_points())
        .map(|i| {
            let vals = &spectra.values[i];
            let vecs = &spectra.vectors[i];
            let lam = band.lambda[i];
            let keep: Vec<usize> = (0..vals.len()).filter(|k| *k < s || *k >= s + m).collect();
            let mut w = Vec::with_capacity(keep.len());
            for &k in &keep {
                let gap = vals[k] - lam;
                if gap.abs() < 0.5 * cert.delta {
                    return Err(BandError::SingularReducedResolvent {
                        x_index: i,
                        distance: gap.abs(),
                    });
                }
                w.push(1.0 / gap);
            }
            let v = Mat::from_fn(vecs.nrows(), keep.len(), |r, c| vecs[(r, keep[c])]);
            let vw = linalg::scale_columns(v.as_ref(), &w);
            Ok(linalg::symmetrize((vw * v.adjoint()).as_ref()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiscreteOperator::new(
        Storage::BlockDiagonal(BlockDiagonal::new(blocks)),
        OperatorLabel::Other,
        None,
    )
    .expect("spectral sum is Hermitian"))
}

/// Everything ε-independent that the band constructions need.
#[derive(Debug, Clone)]
pub struct BandData {
    pub spectra: FibreSpectra,
    pub band: Eigenband,
    pub projection: BandProjection,
    pub resolvent: DiscreteOperator,
}

impl BandData {
    pub fn certificate(&self) -> &GapCertificate {
        self.band
            .certificate
            .as_ref()
            .expect("band data is certified")
    }

    /// max_x λ(x)
    pub fn band_max(&self) -> f64 {
        self.band
            .lambda
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn band_min(&self) -> f64 {
        self.band
            .lambda
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// min_x of the first eigenvalue above the band, if any.
    pub fn next_band_min(&self) -> Option<f64> {
        let k = self.band.start + self.band.multiplicity;
        self.spectra
            .values
            .iter()
            .map(|v| v.get(k).copied())
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn summary(&self) -> BandSummary {
        let c = self.certificate();
        BandSummary {
            index: self.band.selector.index,
            multiplicity: self.band.multiplicity,
            lambda: self.band.lambda.clone(),
            delta: c.delta,
            f_minus: c.f_minus.clone(),
            f_plus: c.f_plus.clone(),
            gap_below: c.gap_below.clone(),
            gap_above: c.gap_above.clone(),
            min_overlap: self.band.min_overlap(),
        }
    }
}

pub fn prepare_band(model: &BundleModel, selector: BandSelector) -> Result<BandData, BandError> {
    let spectra = solve_fibre_spectra(model)?;
    let band = track_band(&spectra, selector)?;
    let cert = certify_gap(&band, &spectra)?;
    let band = band.with_certificate(cert);
    let projection = band_projection(&band)?;
    let resolvent = reduced_resolvent(&band, &spectra)?;
    Ok(BandData {
        spectra,
        band,
        projection,
        resolvent,
    })
}

/// JSON export of a band and its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub index: usize,
    pub multiplicity: usize,
    pub lambda: Vec<f64>,
    pub delta: f64,
    pub f_minus: Vec<f64>,
    pub f_plus: Vec<f64>,
    pub gap_below: Vec<Option<f64>>,
    pub gap_above: Vec<Option<f64>>,
    pub min_overlap: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::small::SmallMatrix;
    use std::f64::consts::{PI, TAU};

    fn flat() -> BundleModel {
        BundleModel::builder(TAU, 8, 10, 1).build().unwrap()
    }

    fn dirichlet(k: usize, nf: usize) -> f64 {
        let h = 1.0 / nf as f64;
        2.0 / (h * h) * (1.0 - (PI * k as f64 * h).cos())
    }

    #[test]
    fn flat_band_is_constant_with_unit_overlaps() {
        let sp = solve_fibre_spectra(&flat()).unwrap();
        let band = track_band(&sp, BandSelector::default()).unwrap();
        for l in &band.lambda {
            assert!((l - dirichlet(1, 10)).abs() < 1e-10);
        }
        assert!(band.overlaps.iter().all(|o| (o - 1.0).abs() < 1e-12));
        let cert = certify_gap(&band, &sp).unwrap();
        let expect = (dirichlet(2, 10) - dirichlet(1, 10)) / 4.0;
        assert!((cert.delta - expect).abs() < 1e-10);
    }

    #[test]
    fn projection_identities() {
        let m = BundleModel::builder(TAU, 8, 10, 1)
            .warp(|x| 1.0 + 0.3 * x.sin())
            .build()
            .unwrap();
        let data = prepare_band(&m, BandSelector::default()).unwrap();
        let p = data.projection.operator.to_dense();
        let p2 = &p * &p;
        assert!(linalg::max_abs((&p2 - &p).as_ref()) < 1e-12);
        let tr: f64 = (0..p.nrows()).map(|i| p[(i, i)].re).sum();
        assert!((tr - 8.0).abs() < 1e-12);
        let r = data.resolvent.to_dense();
        assert!(linalg::max_abs((&r * &p).as_ref()) < 1e-12);
    }

    #[test]
    fn rank_two_spectrum_is_union() {
        let c = 7.5;
        let m = BundleModel::builder(TAU, 8, 10, 2)
            .potential(move |_, _| {
                SmallMatrix::from_fn(2, |r, k| {
                    if r == 1 && k == 1 {
                        c64::new(c, 0.0)
                    } else {
                        c64::new(0.0, 0.0)
                    }
                })
            })
            .build()
            .unwrap();
        let sp = solve_fibre_spectra(&m).unwrap();
        let mut expect: Vec<f64> = (1..10)
            .flat_map(|k| [dirichlet(k, 10), dirichlet(k, 10) + c])
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in sp.values[3].iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_band_fails_certification() {
        let m = BundleModel::builder(TAU, 8, 10, 2).build().unwrap();
        let sp = solve_fibre_spectra(&m).unwrap();
        let band = track_band(
            &sp,
            BandSelector {
                index: 1,
                multiplicity: 1,
            },
        )
        .unwrap();
        assert!(matches!(
            certify_gap(&band, &sp),
            Err(BandError::GapTooSmall { .. })
        ));
        let pair = track_band(
            &sp,
            BandSelector {
                index: 1,
                multiplicity: 2,
            },
        )
        .unwrap();
        assert!(certify_gap(&pair, &sp).is_ok());
    }

    #[test]
    fn uncertified_band_has_no_projection() {
        let sp = solve_fibre_spectra(&flat()).unwrap();
        let band = track_band(&sp, BandSelector::default()).unwrap();
        assert!(matches!(
            band_projection(&band),
            Err(BandError::Uncertified)
        ));
    }

    #[test]
    fn selector_bounds() {
        let sp = solve_fibre_spectra(&flat()).unwrap();
        assert!(track_band(
            &sp,
            BandSelector {
                index: 0,
                multiplicity: 1
            }
        )
        .is_err());
        assert!(track_band(
            &sp,
            BandSelector {
                index: 9,
                multiplicity: 2
            }
        )
        .is_err());
    }
}
