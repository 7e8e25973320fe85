#![allow(dead_code)]

use std::f64::consts::PI;

use adiabat_core::{c64, operator_norm, BundleModel, Mat, MatRef, SmallMatrix};

pub fn flat(nb: usize, nf: usize) -> BundleModel {
    BundleModel::builder(2.0 * PI, nb, nf, 1).build().unwrap()
}

pub fn warped(nb: usize, nf: usize) -> BundleModel {
    BundleModel::builder(2.0 * PI, nb, nf, 1)
        .warp(|x| 1.0 + 0.3 * x.sin())
        .build()
        .unwrap()
}

/// Warped plus V = a·sin(x)cos(πy): the fibre ground state moves with x.
pub fn coupled(nb: usize, nf: usize, a: f64) -> BundleModel {
    BundleModel::builder(2.0 * PI, nb, nf, 1)
        .warp(|x| 1.0 + 0.3 * x.sin())
        .potential(move |x, y| SmallMatrix::scalar(c64::new(a * x.sin() * (PI * y).cos(), 0.0)))
        .build()
        .unwrap()
}

pub fn norm(m: MatRef<'_, c64>) -> f64 {
    operator_norm(m).unwrap()
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut w = 0.0f64;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            w = w.max(m[(r, c)].norm());
        }
    }
    w
}

pub fn identity(d: usize) -> Mat<c64> {
    Mat::from_fn(d, d, |r, c| {
        if r == c {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    })
}

/// Least-squares slope of log y against log x.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Discrete Dirichlet eigenvalue (2/h²)(1 − cos(kπh)), h = 1/n.
pub fn dirichlet(k: usize, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    2.0 / (h * h) * (1.0 - (k as f64 * PI * h).cos())
}
