//! Brute-force reference path on nalgebra: assembles H from scratch and
//! applies every formula as written, with dense products only. P_ε comes
//! from a trapezoidal contour integral of the resolvent of P^χ.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

pub type C = Complex<f64>;
pub type M = DMatrix<C>;

pub struct ScalarModel {
    pub circumference: f64,
    pub base_points: usize,
    pub fibre_points: usize,
    pub warp: fn(f64) -> f64,
    pub potential: fn(f64, f64) -> f64,
}

fn re(x: f64) -> C {
    C::new(x, 0.0)
}

fn eye(d: usize) -> M {
    M::identity(d, d)
}

/// Sorted Hermitian eigenpairs.
pub fn eigh(m: &M) -> (Vec<f64>, M) {
    let e = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = idx.iter().map(|&k| e.eigenvalues[k]).collect();
    let vecs = M::from_fn(m.nrows(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn func(m: &M, f: impl Fn(f64) -> f64) -> M {
    let (vals, v) = eigh(m);
    let d = M::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| re(f(l))),
    ));
    &v * d * v.adjoint()
}

pub fn norm(m: &M) -> f64 {
    m.clone().singular_values().max()
}

impl ScalarModel {
    fn hx(&self) -> f64 {
        self.circumference / self.base_points as f64
    }

    fn hy(&self) -> f64 {
        1.0 / self.fibre_points as f64
    }

    fn inner(&self) -> usize {
        self.fibre_points - 1
    }

    pub fn dim(&self) -> usize {
        self.base_points * self.inner()
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * self.inner() + (j - 1)
    }

    fn f(&self, i: usize) -> f64 {
        (self.warp)(i as f64 * self.hx())
    }

    /// −f⁻¹∂_y² + V on one fibre, Dirichlet ends.
    pub fn fibre(&self, i: usize) -> M {
        let k = self.inner();
        let c = 1.0 / (self.f(i) * self.hy() * self.hy());
        let x = i as f64 * self.hx();
        M::from_fn(k, k, |a, b| {
            if a == b {
                re(2.0 * c + (self.potential)(x, (a + 1) as f64 * self.hy()))
            } else if a + 1 == b || b + 1 == a {
                re(-c)
            } else {
                re(0.0)
            }
        })
    }

    /// Horizontal Laplacian on f^{1/4}-weighted half-densities.
    pub fn horizontal(&self) -> M {
        let d = self.dim();
        let nb = self.base_points;
        let mut m = M::zeros(d, d);
        for i in 0..nb {
            let ip = (i + 1) % nb;
            let (fa, fb) = (self.f(i), self.f(ip));
            let w = (fa.sqrt() + fb.sqrt()) / (2.0 * self.hx() * self.hx());
            let (sa, sb) = (fa.powf(-0.25), fb.powf(-0.25));
            for j in 1..self.fibre_points {
                let (a, b) = (self.at(i, j), self.at(ip, j));
                m[(a, a)] += re(w * sa * sa);
                m[(b, b)] += re(w * sb * sb);
                m[(a, b)] -= re(w * sa * sb);
                m[(b, a)] -= re(w * sa * sb);
            }
        }
        m
    }

    pub fn fibre_block(&self) -> M {
        let d = self.dim();
        let k = self.inner();
        let mut m = M::zeros(d, d);
        for i in 0..self.base_points {
            m.view_mut((i * k, i * k), (k, k)).copy_from(&self.fibre(i));
        }
        m
    }

    pub fn full(&self, eps: f64) -> M {
        self.horizontal() * re(eps * eps) + self.fibre_block()
    }
}

/// Band data for the lowest fibre eigenvalue.
pub struct Band {
    pub p0: M,
    pub r: M,
    pub lambda: Vec<f64>,
    pub second: Vec<f64>,
}

pub fn ground_band(model: &ScalarModel) -> Band {
    let d = model.dim();
    let k = model.inner();
    let mut p0 = M::zeros(d, d);
    let mut r = M::zeros(d, d);
    let mut lambda = Vec::new();
    let mut second = Vec::new();
    for i in 0..model.base_points {
        let hf = model.fibre(i);
        let (vals, vecs) = eigh(&hf);
        let v = vecs.column(0).into_owned();
        let p = &v * v.adjoint();
        // R = (H^F − λ + P)⁻¹ − P
        let shifted = &hf - eye(k) * re(vals[0]) + &p;
        let ri = shifted
            .try_inverse()
            .expect("shifted fibre operator invertible")
            - &p;
        p0.view_mut((i * k, i * k), (k, k)).copy_from(&p);
        r.view_mut((i * k, i * k), (k, k)).copy_from(&ri);
        lambda.push(vals[0]);
        second.push(vals[1]);
    }
    Band {
        p0,
        r,
        lambda,
        second,
    }
}

/// Smooth step: 1 below Λ−w, 0 above Λ.
pub fn chi(lambda: f64, width: f64) -> impl Fn(f64) -> f64 {
    move |s| {
        let t = (lambda - s) / width;
        let e = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            e(t) / (e(t) + e(1.0 - t))
        }
    }
}

pub struct Oracle {
    pub pn: M,
    pub peps: M,
    pub u: M,
    /// P_0 U† P_ε H P_ε U P_0
    pub heff: M,
}

fn commutator(a: &M, b: &M) -> M {
    a * b - b * a
}

/// P^N by the recursion, with ΔP_k carrying their power of ε.
pub fn superadiabatic(h: &M, band: &Band, depth: usize) -> M {
    let d = h.nrows();
    let p0 = &band.p0;
    let q0 = eye(d) - p0;
    let r = &band.r;
    let mut parts: Vec<M> = vec![p0.clone()];
    for n in 0..depth {
        let pn: M = parts.iter().fold(M::zeros(d, d), |acc, p| acc + p);
        let c = commutator(h, &pn);
        let off = -(&q0 * r * &c * p0) + p0 * &c * r * &q0;
        let mut q = M::zeros(d, d);
        for k in 0..=n {
            for l in 0..=n {
                if k + l <= n + 1 {
                    q += &parts[k] * &parts[l];
                }
            }
        }
        let x = q - &pn;
        let diag = -(p0 * &x * p0) + &q0 * &x * &q0;
        parts.push(off + diag);
    }
    parts.iter().fold(M::zeros(d, d), |acc, p| acc + p)
}

/// (i/2π)∮(P − z)⁻¹dz on the circle |z − 1| = 1/2, trapezoidal rule.
pub fn riesz_projection(p: &M, nodes: usize) -> M {
    let d = p.nrows();
    let mut acc = M::zeros(d, d);
    for k in 0..nodes {
        let t = 2.0 * PI * k as f64 / nodes as f64;
        let z = C::new(1.0 + 0.5 * t.cos(), 0.5 * t.sin());
        let dz = C::new(-0.5 * t.sin(), 0.5 * t.cos()) * (2.0 * PI / nodes as f64);
        let res = (p - eye(d) * z).try_inverse().expect("z off the spectrum");
        acc += res * dz;
    }
    acc * C::new(0.0, 1.0 / (2.0 * PI))
}

pub fn run(model: &ScalarModel, eps: f64, depth: usize, lambda_cut: f64, width: f64) -> Oracle {
    let h = model.full(eps);
    let d = h.nrows();
    let band = ground_band(model);
    let pn = superadiabatic(&h, &band, depth);
    let p0 = &band.p0;
    let x = func(&h, chi(lambda_cut, width));
    let one = eye(d);
    let pchi = p0 + (&pn - p0) * &x + &x * (&pn - p0) * (&one - &x);
    let peps = riesz_projection(&pchi, 256);
    let diff = p0 - &peps;
    let s = func(&(&one - &diff * &diff), |t| 1.0 / t.sqrt());
    let u = (&peps * p0 + (&one - &peps) * (&one - p0)) * s;
    let heff = p0 * u.adjoint() * &peps * &h * &peps * &u * p0;
    Oracle { pn, peps, u, heff }
}
