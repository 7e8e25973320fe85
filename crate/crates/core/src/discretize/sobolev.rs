//! ε-scaled discrete Sobolev norms on a single periodic chart.
//!
//! With ψ the physical samples and the weight `h_x h_y √f(x_i)`:
//! `‖v‖²_{W^k} = Σ_{a+b≤k} ‖Y_b X_a ψ‖²`, where the horizontal ladder is
//! `X_0 = ψ, X_1 = εD_xψ, X_2 = εD_x†X_1, …` and the fibre ladder
//! `Y_0 = u, Y_1 = D_y u, Y_2 = D_y†Y_1, …` alternates covariant forward
//! differences and their adjoints with Dirichlet ends.

use faer::c64;

use super::DiscretizeError;
use crate::model::{BundleModel, Grid};
use crate::small::SmallMatrix;

pub const MAX_SOBOLEV_ORDER: usize = 4;

/// Node array with the Dirichlet end rows: index ((i·(N_F+1) + j)·n + a).
struct Field<'a> {
    grid: Grid,
    model: &'a BundleModel,
}

impl Field<'_> {
    fn idx(&self, i: usize, j: usize, a: usize) -> usize {
        (i * (self.grid.fibre_points + 1) + j) * self.grid.rank + a
    }

    fn len(&self) -> usize {
        self.grid.base_points * (self.grid.fibre_points + 1) * self.grid.rank
    }

    fn apply_link(&self, u: &SmallMatrix, v: &[c64], out: &mut [c64], scale: f64) {
        let n = self.grid.rank;
        for a in 0..n {
            let mut acc = c64::new(0.0, 0.0);
            for b in 0..n {
                acc += u.get(a, b) * v[b];
            }
            out[a] += acc * scale;
        }
    }

    /// (D_x u)_i = (U_i u_{i+1} − u_i)/h_x, scaled by `s`.
    fn dx(&self, u: &[c64], s: f64) -> Vec<c64> {
        let g = self.grid;
        let n = g.rank;
        let mut out = vec![c64::new(0.0, 0.0); self.len()];
        for i in 0..g.base_points {
            let ip = g.next(i);
            for j in 1..g.fibre_points {
                let link = self.model.link_x(i, j);
                let o = self.idx(i, j, 0);
                let src = self.idx(ip, j, 0);
                let (next, cur) = (u[src..src + n].to_vec(), u[o..o + n].to_vec());
                self.apply_link(&link, &next, &mut out[o..o + n], s / g.hx);
                for a in 0..n {
                    out[o + a] -= cur[a] * (s / g.hx);
                }
            }
        }
        out
    }

    /// (D_x† w)_i = (U_{i−1}† w_{i−1} − w_i)/h_x, scaled by `s`.
    fn dx_adj(&self, w: &[c64], s: f64) -> Vec<c64> {
        let g = self.grid;
        let n = g.rank;
        let mut out = vec![c64::new(0.0, 0.0); self.len()];
        for i in 0..g.base_points {
            let im = g.prev(i);
            for j in 1..g.fibre_points {
                let link = self.model.link_x(im, j).adjoint();
                let o = self.idx(i, j, 0);
                let src = self.idx(im, j, 0);
                self.apply_link(&link, &w[src..src + n], &mut out[o..o + n], s / g.hx);
                for a in 0..n {
                    out[o + a] -= w[o + a] * (s / g.hx);
                }
            }
        }
        out
    }

    /// Vertical edges j = 0..N_F stored in the j slot: (U u_{j+1} − u_j)/h_y.
    fn dy(&self, u: &[c64]) -> Vec<c64> {
        let g = self.grid;
        let n = g.rank;
        let mut out = vec![c64::new(0.0, 0.0); self.len()];
        for i in 0..g.base_points {
            for j in 0..g.fibre_points {
                let link = self.model.link_y(i, j);
                let o = self.idx(i, j, 0);
                let src = self.idx(i, j + 1, 0);
                let (next, cur) = (u[src..src + n].to_vec(), u[o..o + n].to_vec());
                self.apply_link(&link, &next, &mut out[o..o + n], 1.0 / g.hy);
                for a in 0..n {
                    out[o + a] -= cur[a] / g.hy;
                }
            }
        }
        out
    }

    /// Adjoint of `dy` onto interior nodes; Dirichlet rows stay zero.
    fn dy_adj(&self, e: &[c64]) -> Vec<c64> {
        let g = self.grid;
        let n = g.rank;
        let mut out = vec![c64::new(0.0, 0.0); self.len()];
        for i in 0..g.base_points {
            for j in 1..g.fibre_points {
                let link = self.model.link_y(i, j - 1).adjoint();
                let o = self.idx(i, j, 0);
                let src = self.idx(i, j - 1, 0);
                self.apply_link(&link, &e[src..src + n], &mut out[o..o + n], 1.0 / g.hy);
                for a in 0..n {
                    out[o + a] -= e[o + a] / g.hy;
                }
            }
        }
        out
    }

    /// Σ h_x h_y √f_i |u|² over every stored slot.
    fn weighted_sq(&self, u: &[c64]) -> f64 {
        let g = self.grid;
        let per_x = (g.fibre_points + 1) * g.rank;
        u.chunks(per_x)
            .enumerate()
            .map(|(i, c)| {
                g.hx * g.hy
                    * self.model.warp[i].sqrt()
                    * c.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum()
    }
}

/// ‖v‖_{W^k_ε} for a flat-representation vector v of the model dimension.
pub fn sobolev_norm(
    v: &[c64],
    k: usize,
    eps: f64,
    model: &BundleModel,
) -> Result<f64, DiscretizeError> {
    if k > MAX_SOBOLEV_ORDER {
        return Err(DiscretizeError::UnsupportedOrder(k));
    }
    let grid = model.grid();
    if v.len() != grid.dimension() {
        return Err(DiscretizeError::DimensionMismatch {
            expected: grid.dimension(),
            got: v.len(),
        });
    }
    let f = Field { grid, model };
    let n = grid.rank;
    let mut psi = vec![c64::new(0.0, 0.0); f.len()];
    for i in 0..grid.base_points {
        let s = 1.0 / ((grid.hx * grid.hy).sqrt() * model.warp[i].powf(0.25));
        for j in 1..grid.fibre_points {
            for a in 0..n {
                psi[f.idx(i, j, a)] = v[grid.index(i, j, a)] * s;
            }
        }
    }
    let mut horizontal = vec![psi];
    for a in 1..=k {
        let prev = &horizontal[a - 1];
        let next = if a % 2 == 1 {
            f.dx(prev, eps)
        } else {
            f.dx_adj(prev, eps)
        };
        horizontal.push(next);
    }
    let mut total = 0.0;
    for (a, xa) in horizontal.iter().enumerate() {
        let mut y = xa.clone();
        total += f.weighted_sq(&y);
        for b in 1..=(k - a) {
            y = if b % 2 == 1 { f.dy(&y) } else { f.dy_adj(&y) };
            total += f.weighted_sq(&y);
        }
    }
    Ok(total.sqrt())
}
