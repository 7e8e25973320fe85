//! Dense helpers on faer matrices shared by the modules.

use faer::{c64, Mat, MatRef};

/// max |M_ij − conj(M_ji)|
pub fn hermitian_defect(m: MatRef<'_, c64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (M + M†)/2, exactly Hermitian.
pub fn symmetrize(m: MatRef<'_, c64>) -> Mat<c64> {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    let mut out = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
        out[(j, j)].im = 0.0;
    }
    out
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    })
}

/// Multiplies column k by w[k].
pub fn scale_columns(m: MatRef<'_, c64>, w: &[f64]) -> Mat<c64> {
    assert_eq!(m.ncols(), w.len());
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * w[j])
}

/// Horizontal concatenation.
pub fn hcat(parts: &[MatRef<'_, c64>]) -> Mat<c64> {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::<c64>::zeros(rows, cols);
    let mut off = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows);
        out.as_mut().subcols_mut(off, p.ncols()).copy_from(p);
        off += p.ncols();
    }
    out
}

/// Orthonormal basis of the column span, by classical Gram–Schmidt with one
/// reorthogonalization pass. Columns whose residual falls below
/// `drop_ratio` times their original norm are treated as dependent and skipped.
pub fn orthonormal_basis(m: MatRef<'_, c64>, drop_ratio: f64) -> Mat<c64> {
    let rows = m.nrows();
    let mut kept: Vec<Vec<c64>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: Vec<c64> = (0..rows).map(|i| m[(i, j)]).collect();
        let norm0 = norm(&v);
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &kept {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv <= drop_ratio * norm0 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= nv;
        }
        kept.push(v);
    }
    Mat::from_fn(rows, kept.len(), |i, j| kept[j][i])
}

/// conj(a)·b
pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_basis_drops_dependent_columns() {
        let m = Mat::from_fn(4, 3, |i, j| match j {
            0 => c64::new(i as f64, 1.0),
            1 => c64::new(2.0 * i as f64, 2.0),
            _ => c64::new(1.0, (i * i) as f64),
        });
        let q = orthonormal_basis(m.as_ref(), 1e-12);
        assert_eq!(q.ncols(), 2);
        let g = q.adjoint() * &q;
        assert!(max_abs((&g - identity(2)).as_ref()) < 1e-14);
    }

    #[test]
    fn symmetrize_is_exactly_hermitian() {
        let m = Mat::from_fn(5, 5, |i, j| {
            c64::new((i * 3 + j) as f64 * 0.1, (i as f64) - 0.5 * j as f64)
        });
        assert_eq!(hermitian_defect(symmetrize(m.as_ref()).as_ref()), 0.0);
    }
}
