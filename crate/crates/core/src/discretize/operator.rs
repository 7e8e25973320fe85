//! Operator containers: compressed sparse rows, uniform block diagonals and
//! dense matrices behind one Hermitian `DiscreteOperator` type.

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::DiscretizeError;
use crate::linalg;

/// Hermiticity tolerance for every labeled operator.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorLabel {
    #[serde(rename = "H_F_block")]
    HFBlock,
    #[serde(rename = "Delta_H")]
    DeltaH,
    #[serde(rename = "H1")]
    H1,
    #[serde(rename = "H_full")]
    HFull,
    #[serde(rename = "projection")]
    Projection,
    #[serde(rename = "other")]
    Other,
}

impl OperatorLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorLabel::HFBlock => "H_F_block",
            OperatorLabel::DeltaH => "Delta_H",
            OperatorLabel::H1 => "H1",
            OperatorLabel::HFull => "H_full",
            OperatorLabel::Projection => "projection",
            OperatorLabel::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "H_F_block" => OperatorLabel::HFBlock,
            "Delta_H" => OperatorLabel::DeltaH,
            "H1" => OperatorLabel::H1,
            "H_full" => OperatorLabel::HFull,
            "projection" => OperatorLabel::Projection,
            "other" => OperatorLabel::Other,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<c64>,
}

impl CsrMatrix {
    /// Sums duplicate entries; keeps explicit zeros that result from sums.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, c64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<c64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, vec![])
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => c64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// A·X
    pub fn mul_dense(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        assert_eq!(self.cols, x.nrows());
        let mut out = Mat::<c64>::zeros(self.rows, x.ncols());
        for j in 0..x.ncols() {
            let xc = x.col(j);
            let oc = out.col_as_slice_mut(j);
            for (r, o) in oc.iter_mut().enumerate() {
                let mut acc = c64::new(0.0, 0.0);
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * xc[self.col_idx[k]];
                }
                *o = acc;
            }
        }
        out
    }

    /// X·A
    pub fn left_mul_dense(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        assert_eq!(x.ncols(), self.rows);
        let mut out = Mat::<c64>::zeros(x.nrows(), self.cols);
        for (r, c, v) in self.triplets() {
            let xr = x.col(r);
            let oc = out.col_as_slice_mut(c);
            for (i, o) in oc.iter_mut().enumerate() {
                *o += xr[i] * v;
            }
        }
        out
    }

    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for (r, c, v) in self.triplets() {
            worst = worst.max((v - self.get(c, r).conj()).norm());
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Σ coeffs[k]·parts[k] entrywise over the union of patterns, each entry
    /// evaluated with the same left-to-right expression.
    pub fn combine(parts: &[&CsrMatrix], coeffs: &[f64]) -> Self {
        assert_eq!(parts.len(), coeffs.len());
        let rows = parts[0].rows;
        let cols = parts[0].cols;
        let mut trip = Vec::new();
        for r in 0..rows {
            let mut cs: Vec<usize> = parts
                .iter()
                .flat_map(|p| p.row(r).map(|(c, _)| c))
                .collect();
            cs.sort_unstable();
            cs.dedup();
            for c in cs {
                let v = combine_entry(parts.iter().map(|p| p.get(r, c)), coeffs);
                trip.push((r, c, v));
            }
        }
        Self::from_triplets(rows, cols, trip)
    }
}

pub(crate) fn combine_entry(vals: impl Iterator<Item = c64>, coeffs: &[f64]) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for (v, &k) in vals.zip(coeffs) {
        acc += v * k;
    }
    acc
}

/// Uniform square blocks along the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    pub blocks: Vec<Mat<c64>>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<Mat<c64>>) -> Self {
        if let Some(b) = blocks.first() {
            let s = b.nrows();
            assert!(
                blocks.iter().all(|m| m.nrows() == s && m.ncols() == s),
                "blocks must be uniform and square"
            );
        }
        Self { blocks }
    }

    pub fn block_size(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn dim(&self) -> usize {
        self.blocks.len() * self.block_size()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let b = self.block_size();
        let mut m = Mat::<c64>::zeros(self.dim(), self.dim());
        for (i, blk) in self.blocks.iter().enumerate() {
            m.as_mut().submatrix_mut(i * b, i * b, b, b).copy_from(blk);
        }
        m
    }

    /// B·X
    pub fn mul_dense(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let b = self.block_size();
        assert_eq!(x.nrows(), self.dim());
        let mut out = Mat::<c64>::zeros(x.nrows(), x.ncols());
        for (i, blk) in self.blocks.iter().enumerate() {
            let prod = blk * x.subrows(i * b, b);
            out.as_mut().subrows_mut(i * b, b).copy_from(&prod);
        }
        out
    }

    /// X·B
    pub fn left_mul_dense(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let b = self.block_size();
        assert_eq!(x.ncols(), self.dim());
        let mut out = Mat::<c64>::zeros(x.nrows(), x.ncols());
        for (i, blk) in self.blocks.iter().enumerate() {
            let prod = x.subcols(i * b, b) * blk;
            out.as_mut().subcols_mut(i * b, b).copy_from(&prod);
        }
        out
    }

    pub fn triplets(&self) -> Vec<(usize, usize, c64)> {
        let b = self.block_size();
        let mut out = Vec::new();
        for (i, blk) in self.blocks.iter().enumerate() {
            for c in 0..b {
                for r in 0..b {
                    let v = blk[(r, c)];
                    if v != c64::new(0.0, 0.0) {
                        out.push((i * b + r, i * b + c, v));
                    }
                }
            }
        }
        out
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.dim(), self.dim(), self.triplets())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Sparse(CsrMatrix),
    BlockDiagonal(BlockDiagonal),
    Dense(Mat<c64>),
}

/// Hermitian operator on the grid space (or on a band coefficient space).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    storage: Storage,
    label: OperatorLabel,
    epsilon: Option<f64>,
}

impl DiscreteOperator {
    pub fn new(
        storage: Storage,
        label: OperatorLabel,
        epsilon: Option<f64>,
    ) -> Result<Self, DiscretizeError> {
        let op = Self {
            storage,
            label,
            epsilon,
        };
        let defect = op.hermitian_defect();
        if !(defect <= HERMITIAN_TOLERANCE) {
            return Err(DiscretizeError::NotHermitian { label, defect });
        }
        Ok(op)
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn label(&self) -> OperatorLabel {
        self.label
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Sparse(m) => m.nrows(),
            Storage::BlockDiagonal(b) => b.dim(),
            Storage::Dense(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> Mat<c64> {
        match &self.storage {
            Storage::Sparse(m) => m.to_dense(),
            Storage::BlockDiagonal(b) => b.to_dense(),
            Storage::Dense(m) => m.clone(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match &self.storage {
            Storage::Sparse(m) => m.clone(),
            Storage::BlockDiagonal(b) => b.to_csr(),
            Storage::Dense(m) => {
                let mut t = Vec::new();
                for c in 0..m.ncols() {
                    for r in 0..m.nrows() {
                        if m[(r, c)] != c64::new(0.0, 0.0) {
                            t.push((r, c, m[(r, c)]));
                        }
                    }
                }
                CsrMatrix::from_triplets(m.nrows(), m.ncols(), t)
            }
        }
    }

    /// A·X
    pub fn apply(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        match &self.storage {
            Storage::Sparse(m) => m.mul_dense(x),
            Storage::BlockDiagonal(b) => b.mul_dense(x),
            Storage::Dense(m) => m * x,
        }
    }

    /// X·A
    pub fn apply_left(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        match &self.storage {
            Storage::Sparse(m) => m.left_mul_dense(x),
            Storage::BlockDiagonal(b) => b.left_mul_dense(x),
            Storage::Dense(m) => x * m,
        }
    }

    pub fn hermitian_defect(&self) -> f64 {
        match &self.storage {
            Storage::Sparse(m) => m.hermitian_defect(),
            Storage::BlockDiagonal(b) => b
                .blocks
                .iter()
                .map(|m| linalg::hermitian_defect(m.as_ref()))
                .fold(0.0, f64::max),
            Storage::Dense(m) => linalg::hermitian_defect(m.as_ref()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Sparse(m) => m.max_abs(),
            Storage::BlockDiagonal(b) => b
                .blocks
                .iter()
                .map(|m| linalg::max_abs(m.as_ref()))
                .fold(0.0, f64::max),
            Storage::Dense(m) => linalg::max_abs(m.as_ref()),
        }
    }
}

/// Any finite square matrix: intertwiners, commutators, residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct RawOperator {
    pub matrix: Mat<c64>,
    pub label: OperatorLabel,
}

impl RawOperator {
    pub fn new(matrix: Mat<c64>, label: OperatorLabel) -> Self {
        Self { matrix, label }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_finite(&self) -> bool {
        linalg::max_abs(self.matrix.as_ref()).is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn triplets_are_summed_and_sorted() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![
                (1, 0, z(1.0, 0.0)),
                (0, 1, z(2.0, 0.0)),
                (1, 0, z(0.5, 1.0)),
            ],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), z(1.5, 1.0));
        assert_eq!(m.get(0, 0), z(0.0, 0.0));
    }

    #[test]
    fn sparse_products_match_dense() {
        let m = CsrMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 0, z(1.0, 0.0)),
                (0, 2, z(0.0, 1.0)),
                (2, 0, z(0.0, -1.0)),
                (1, 1, z(3.0, 0.0)),
            ],
        );
        let x = Mat::from_fn(3, 2, |i, j| z(i as f64 + 1.0, j as f64));
        let d = m.to_dense();
        assert_eq!(m.mul_dense(x.as_ref()), &d * &x);
        let y = Mat::from_fn(2, 3, |i, j| z(j as f64, i as f64 - 1.0));
        assert_eq!(m.left_mul_dense(y.as_ref()), &y * &d);
        assert_eq!(m.hermitian_defect(), 0.0);
    }

    #[test]
    fn block_products_match_dense() {
        let blk = |s: f64| {
            Mat::from_fn(
                2,
                2,
                |i, j| if i == j { z(s, 0.0) } else { z(0.5, 0.5 * s) },
            )
        };
        let b = BlockDiagonal::new(vec![blk(1.0), blk(2.0)]);
        let x = Mat::from_fn(4, 3, |i, j| z(i as f64, j as f64 + 1.0));
        let d = b.to_dense();
        assert_eq!(b.mul_dense(x.as_ref()), &d * &x);
        assert_eq!(b.to_csr().to_dense(), d);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, z(1.0, 0.0))]);
        assert!(DiscreteOperator::new(Storage::Sparse(m), OperatorLabel::Other, None).is_err());
    }
}
