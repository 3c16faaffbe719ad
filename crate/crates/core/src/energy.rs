//! Regularized discrete energies
//!
//! ```text
//! E(u) = sum_cells vol * ( w(p) * (s + eps^2)^{p/2} + F(x_c, p, mean u) )
//! ```
//!
//! where `s` is the cell's squared gradient magnitude, `w(p)` is 1 for the
//! Sobolev modular and `1/p` for the Dirichlet energy, and `F` a lower-order
//! term. Every cell is evaluated independently; contributions are scattered
//! in cell order so the result does not depend on the execution mode.

use crate::cells::{Cell, CellSet};
use crate::domain::Point;
use crate::parallel::{ordered_sum, Execution};

/// A zeroth-order term `F(x, p, z)` of the integrand.
pub trait LowerOrder: Sync {
    fn value(&self, x: Point, p: f64, z: f64) -> f64;
    /// `dF/dz`.
    fn derivative(&self, x: Point, p: f64, z: f64) -> f64;
    /// A nonnegative model of `d2F/dz2`, used only to precondition and
    /// build Newton systems.
    fn curvature(&self, x: Point, p: f64, z: f64) -> f64 {
        let d = 1e-6 * (1.0 + z.abs());
        ((self.derivative(x, p, z + d) - self.derivative(x, p, z - d)) / (2.0 * d)).max(0.0)
    }
    /// `F(x, p, z0 + dz) - F(x, p, z0)`; implementations should avoid the
    /// cancellation of the plain difference when `dz` is small.
    fn increment(&self, x: Point, p: f64, z0: f64, dz: f64) -> f64 {
        self.value(x, p, z0 + dz) - self.value(x, p, z0)
    }
}

/// `b^q - a^q` for `a, b >= 0` given `d = b - a` computed separately.
#[inline]
pub(crate) fn pow_increment(a: f64, d: f64, q: f64) -> f64 {
    let r = d / a;
    if a > 0.0 && r.abs() <= 1.0 {
        // rounding can put r just below -1 when b vanishes
        a.powf(q) * (q * r.max(-1.0).ln_1p()).exp_m1()
    } else {
        // large relative change: no cancellation to avoid
        (a + d).max(0.0).powf(q) - a.powf(q)
    }
}

/// `|z0 + dz|^q - |z0|^q`.
#[inline]
pub(crate) fn abs_pow_increment(z0: f64, dz: f64, q: f64) -> f64 {
    let z1 = z0 + dz;
    if z0 != 0.0 && (z0 > 0.0) == (z1 > 0.0) {
        let d = if z0 > 0.0 { dz } else { -dz };
        pow_increment(z0.abs(), d, q)
    } else {
        z1.abs().powf(q) - z0.abs().powf(q)
    }
}

/// `|z|^p`, the zeroth-order part of the Sobolev modular.
pub struct PowerMass;

/// Keeps `|z|^{p-2}` finite for `p < 2`.
const CURVATURE_FLOOR: f64 = 1e-8;

impl LowerOrder for PowerMass {
    fn value(&self, _: Point, p: f64, z: f64) -> f64 {
        z.abs().powf(p)
    }

    fn derivative(&self, _: Point, p: f64, z: f64) -> f64 {
        p * z.abs().powf(p - 1.0) * z.signum()
    }

    fn curvature(&self, _: Point, p: f64, z: f64) -> f64 {
        p * (p - 1.0) * z.abs().max(CURVATURE_FLOOR).powf(p - 2.0)
    }

    fn increment(&self, _: Point, p: f64, z0: f64, dz: f64) -> f64 {
        abs_pow_increment(z0, dz, p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradWeight {
    Unit,
    InverseP,
}

impl GradWeight {
    #[inline]
    fn at(self, p: f64) -> f64 {
        match self {
            GradWeight::Unit => 1.0,
            GradWeight::InverseP => 1.0 / p,
        }
    }
}

pub struct Energy<'a> {
    pub cells: &'a CellSet,
    pub weight: GradWeight,
    pub lower: &'a dyn LowerOrder,
    pub exec: Execution,
}

/// `(phi, phi', phi'')` of `phi(s) = (s + eps^2)^{p/2}`. At `eps = 0` and
/// `s = 0` the gradient `phi'(s) ds` vanishes in the limit; `phi'` itself
/// is 1 for `p = 2` and reported as 0 otherwise (its limit for `p > 2`).
#[inline]
fn phi(s: f64, eps: f64, p: f64) -> (f64, f64, f64) {
    let t = s + eps * eps;
    if t == 0.0 {
        return (0.0, if p == 2.0 { 1.0 } else { 0.0 }, 0.0);
    }
    let half = 0.5 * p;
    let v = t.powf(half);
    let d1 = half * v / t;
    let d2 = (half - 1.0) * d1 / t;
    (v, d1, d2)
}

impl Energy<'_> {
    fn cell_value(&self, c: &Cell, u: &[f64], eps: f64) -> f64 {
        let l = self.cells.local(c, u);
        let (s, _) = self.cells.grad_sq(&l);
        let (ph, _, _) = phi(s, eps, c.p);
        self.cells.volume * (self.weight.at(c.p) * ph + self.lower.value(c.center, c.p, self.cells.mean(&l)))
    }

    fn cell_increment(&self, c: &Cell, u: &[f64], v: &[f64], eps: f64) -> f64 {
        let cs = self.cells;
        let l0 = cs.local(c, u);
        let l1 = cs.local(c, v);
        let mut dl = [0.0; 4];
        for k in 0..cs.corner_count {
            dl[k] = l1[k] - l0[k];
        }
        let (s0, _) = cs.grad_sq(&l0);
        let ds = cs.grad_sq_increment(&l0, &dl);
        let grad = pow_increment(s0 + eps * eps, ds, 0.5 * c.p);
        let low = self.lower.increment(c.center, c.p, cs.mean(&l0), cs.mean(&dl));
        cs.volume * (self.weight.at(c.p) * grad + low)
    }

    fn cell_gradient(&self, c: &Cell, u: &[f64], eps: f64) -> (f64, [f64; 4]) {
        let cs = self.cells;
        let l = cs.local(c, u);
        let (s, ds) = cs.grad_sq(&l);
        let (ph, d1, _) = phi(s, eps, c.p);
        let w = self.weight.at(c.p);
        let z = cs.mean(&l);
        let f1 = self.lower.derivative(c.center, c.p, z) / cs.corner_count as f64;
        let mut g = [0.0; 4];
        for k in 0..cs.corner_count {
            g[k] = cs.volume * (w * d1 * ds[k] + f1);
        }
        (cs.volume * (w * ph + self.lower.value(c.center, c.p, z)), g)
    }

    fn cell_hessian(&self, c: &Cell, u: &[f64], eps: f64) -> [[f64; 4]; 4] {
        let cs = self.cells;
        let m = cs.corner_count;
        let l = cs.local(c, u);
        let (s, ds) = cs.grad_sq(&l);
        let (_, d1, d2) = phi(s, eps, c.p);
        let w = self.weight.at(c.p) * cs.volume;
        let f2 = cs.volume * self.lower.curvature(c.center, c.p, cs.mean(&l)) / (m * m) as f64;
        let mut h = [[0.0; 4]; 4];
        for k in 0..m {
            let mut e = [0.0; 4];
            e[k] = 1.0;
            let a = cs.grad_sq(&e).1;
            for j in 0..m {
                h[j][k] = w * (d2 * ds[j] * ds[k] + d1 * a[j]) + f2;
            }
        }
        h
    }

    pub fn value(&self, u: &[f64], eps: f64) -> f64 {
        let per_cell = self.exec.map(&self.cells.cells, |c| self.cell_value(c, u, eps));
        ordered_sum(per_cell)
    }

    /// `E(v) - E(u)`, summed from per-cell increments so that it stays
    /// accurate when the difference is far below the rounding error of
    /// either energy.
    pub fn difference(&self, u: &[f64], v: &[f64], eps: f64) -> f64 {
        let per_cell = self
            .exec
            .map(&self.cells.cells, |c| self.cell_increment(c, u, v, eps));
        ordered_sum(per_cell)
    }

    /// `E_{eps1}(u) - E_{eps0}(u)`.
    pub fn regularization_change(&self, u: &[f64], eps0: f64, eps1: f64) -> f64 {
        let cs = self.cells;
        let per_cell = self.exec.map(&cs.cells, |c| {
            let (s, _) = cs.grad_sq(&cs.local(c, u));
            let t = pow_increment(s + eps0 * eps0, eps1 * eps1 - eps0 * eps0, 0.5 * c.p);
            cs.volume * self.weight.at(c.p) * t
        });
        ordered_sum(per_cell)
    }

    /// Energy and its gradient with respect to every node value.
    pub fn value_and_gradient(&self, u: &[f64], eps: f64, grad: &mut [f64]) -> f64 {
        let per_cell = self
            .exec
            .map(&self.cells.cells, |c| self.cell_gradient(c, u, eps));
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (c, (_, g)) in self.cells.cells.iter().zip(&per_cell) {
            for k in 0..self.cells.corner_count {
                grad[c.corners[k]] += g[k];
            }
        }
        ordered_sum(per_cell.iter().map(|(v, _)| *v))
    }

    pub fn hessian(&self, u: &[f64], eps: f64) -> Hessian<'_> {
        let blocks = self.exec.map(&self.cells.cells, |c| self.cell_hessian(c, u, eps));
        Hessian {
            cells: self.cells,
            blocks,
        }
    }

    /// Per-node `d/du` of the energy at `eps = 0`, divided by the cell
    /// volume: the discrete Euler-Lagrange residual.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; u.len()];
        self.value_and_gradient(u, 0.0, &mut g);
        let inv = 1.0 / self.cells.volume;
        g.iter_mut().for_each(|v| *v *= inv);
        g
    }
}

/// Assembled cell blocks of the energy Hessian.
pub struct Hessian<'a> {
    cells: &'a CellSet,
    blocks: Vec<[[f64; 4]; 4]>,
}

impl Hessian<'_> {
    /// `out = H v`, restricted to entries with `mask[i]` (others read as 0).
    pub fn apply(&self, v: &[f64], mask: &[bool], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let m = self.cells.corner_count;
        for (c, h) in self.cells.cells.iter().zip(&self.blocks) {
            let mut l = [0.0; 4];
            for k in 0..m {
                let i = c.corners[k];
                if mask[i] {
                    l[k] = v[i];
                }
            }
            for j in 0..m {
                let i = c.corners[j];
                if mask[i] {
                    out[i] += (0..m).map(|k| h[j][k] * l[k]).sum::<f64>();
                }
            }
        }
    }

    pub fn diagonal(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for (c, h) in self.cells.cells.iter().zip(&self.blocks) {
            for k in 0..self.cells.corner_count {
                d[c.corners[k]] += h[k][k];
            }
        }
        d
    }
}
