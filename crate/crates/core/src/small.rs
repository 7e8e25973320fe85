//! Small dense n×n complex matrices for the pointwise bundle fields.

use std::ops::{Add, Mul, Sub};

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

/// Row-major n×n complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallMatrix {
    n: usize,
    data: Vec<c64>,
}

impl SmallMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![c64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = c64::new(1.0, 0.0);
        }
        m
    }

    pub fn scalar(z: c64) -> Self {
        Self {
            n: 1,
            data: vec![z],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> c64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        Self { n, data }
    }

    /// Builds from row-major real and imaginary parts; `None` if the shapes are not n×n.
    pub fn from_parts(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Option<Self> {
        let n = re.len();
        if re.iter().any(|row| row.len() != n) {
            return None;
        }
        if let Some(im) = im {
            if im.len() != n || im.iter().any(|row| row.len() != n) {
                return None;
            }
        }
        Some(Self::from_fn(n, |r, c| {
            c64::new(re[r][c], im.map_or(0.0, |im| im[r][c]))
        }))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> c64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, z: c64) {
        self.data[r * self.n + c] = z;
    }

    pub fn as_slice(&self) -> &[c64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |r, c| self.get(c, r).conj())
    }

    pub fn scale(&self, z: c64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v * z).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// max |M − M†|
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for c in 0..self.n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// max |M + M†|
    pub fn antihermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for c in 0..self.n {
                worst = worst.max((self.get(r, c) + self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// max |M†M − 1|
    pub fn unitarity_defect(&self) -> f64 {
        let p = &self.adjoint() * self;
        (&p - &Self::identity(self.n)).max_abs()
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_re(0.5)
    }

    pub fn antihermitian_part(&self) -> Self {
        (self - &self.adjoint()).scale_re(0.5)
    }

    pub fn to_mat(&self) -> Mat<c64> {
        Mat::from_fn(self.n, self.n, |r, c| self.get(r, c))
    }

    pub fn from_mat(m: MatRef<'_, c64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self::from_fn(m.nrows(), |r, c| m[(r, c)])
    }

    /// exp(h·A) for anti-Hermitian A. Exactly the identity when A is zero.
    pub fn exp_antihermitian(&self, h: f64) -> Self {
        if self.is_zero() {
            return Self::identity(self.n);
        }
        if self.n == 1 {
            let a = self.data[0];
            return Self::scalar((a * h).exp());
        }
        // K = iA is Hermitian and hA = -iK.
        let k = Mat::from_fn(self.n, self.n, |r, c| {
            let v = c64::new(0.0, 1.0) * self.get(r, c);
            let w = c64::new(0.0, 1.0) * self.get(c, r);
            (v + w.conj()) * 0.5
        });
        let eig = k
            .self_adjoint_eigen(Side::Lower)
            .expect("Hermitian eigensolver failed on a small matrix");
        let u = eig.U();
        let s = eig.S();
        let phases: Vec<c64> = (0..self.n)
            .map(|i| c64::new(0.0, -h * s[i].re).exp())
            .collect();
        Self::from_fn(self.n, |r, c| {
            (0..self.n)
                .map(|k| u[(r, k)] * phases[k] * u[(c, k)].conj())
                .sum()
        })
    }

    /// Principal logarithm of a unitary matrix, returned anti-Hermitian.
    /// Exactly zero when the input is exactly the identity.
    pub fn log_unitary(&self) -> Self {
        if *self == Self::identity(self.n) {
            return Self::zeros(self.n);
        }
        if self.n == 1 {
            return Self::scalar(c64::new(0.0, self.data[0].arg()));
        }
        let m = self.to_mat();
        let eig = m.eigen().expect("eigensolver failed on a small matrix");
        let v = eig.U();
        let s = eig.S();
        let vinv = v.partial_piv_lu().inverse();
        let logs: Vec<c64> = (0..self.n).map(|i| c64::new(0.0, s[i].arg())).collect();
        let l = Self::from_fn(self.n, |r, c| {
            (0..self.n)
                .map(|k| v[(r, k)] * logs[k] * vinv[(k, c)])
                .sum()
        });
        l.antihermitian_part()
    }
}

impl Mul for &SmallMatrix {
    type Output = SmallMatrix;

    fn mul(self, rhs: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.n, rhs.n, "small matrix dimension mismatch");
        let n = self.n;
        let mut out = SmallMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.get(k, c);
                }
            }
        }
        out
    }
}

impl Add for &SmallMatrix {
    type Output = SmallMatrix;

    fn add(self, rhs: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.n, rhs.n, "small matrix dimension mismatch");
        SmallMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &SmallMatrix {
    type Output = SmallMatrix;

    fn sub(self, rhs: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.n, rhs.n, "small matrix dimension mismatch");
        SmallMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}
