//! Cell-centred quadrature shared by every integral in the crate: a cell's
//! function value is the average of its corners, its exponent is evaluated
//! at the cell centre, and its weight is the cell volume.
//!
//! The squared gradient magnitude of a cell is the mean of the squared
//! forward differences along its edges, per axis. For functions that are
//! affine on the cell this equals the squared norm of the averaged-edge
//! gradient from [`GridDomain::discrete_gradient`]; unlike that quantity it
//! vanishes only on cell-wise constants, so the quadratic energy assembles
//! to the 5-point Laplacian.

use crate::domain::{GridDomain, Point};
use crate::exponent::ExponentField;

#[derive(Clone, Debug)]
pub struct Cell {
    pub corners: [usize; 4],
    pub center: Point,
    /// Exponent at the centre.
    pub p: f64,
}

#[derive(Clone, Debug)]
pub struct CellSet {
    pub cells: Vec<Cell>,
    /// 2 in 1D, 4 in 2D.
    pub corner_count: usize,
    pub inv_h: [f64; 2],
    pub volume: f64,
    pub node_count: usize,
}

impl CellSet {
    /// Cells of `domain`; with `active_only` the cells touching an excluded
    /// node are dropped.
    pub fn new(domain: &GridDomain, p: &ExponentField, active_only: bool) -> Self {
        let cells = (0..domain.cell_count())
            .filter(|&c| !active_only || domain.cell_active(c))
            .map(|c| {
                let (corners, _) = domain.cell_corners(c);
                let center = domain.cell_center(c);
                Cell {
                    corners,
                    center,
                    p: p.eval(center),
                }
            })
            .collect();
        let h = domain.spacing();
        CellSet {
            cells,
            corner_count: if domain.dim() == 1 { 2 } else { 4 },
            inv_h: [1.0 / h[0], if domain.dim() == 2 { 1.0 / h[1] } else { 0.0 }],
            volume: domain.cell_volume(),
            node_count: domain.node_count(),
        }
    }

    #[inline]
    pub fn local(&self, cell: &Cell, u: &[f64]) -> [f64; 4] {
        let mut l = [0.0; 4];
        for k in 0..self.corner_count {
            l[k] = u[cell.corners[k]];
        }
        l
    }

    #[inline]
    pub fn mean(&self, l: &[f64; 4]) -> f64 {
        if self.corner_count == 2 {
            0.5 * (l[0] + l[1])
        } else {
            0.25 * (l[0] + l[1] + l[2] + l[3])
        }
    }

    /// Squared gradient magnitude `s` and its derivative with respect to the
    /// corner values. `s` is a quadratic form, so the derivative is linear in
    /// `l` and `grad_sq(v).1` applies its Hessian to `v`.
    #[inline]
    pub fn grad_sq(&self, l: &[f64; 4]) -> (f64, [f64; 4]) {
        let [ix, iy] = self.inv_h;
        if self.corner_count == 2 {
            let d = (l[1] - l[0]) * ix;
            (d * d, [-2.0 * d * ix, 2.0 * d * ix, 0.0, 0.0])
        } else {
            let dxb = (l[1] - l[0]) * ix;
            let dxt = (l[3] - l[2]) * ix;
            let dyl = (l[2] - l[0]) * iy;
            let dyr = (l[3] - l[1]) * iy;
            let s = 0.5 * (dxb * dxb + dxt * dxt + dyl * dyl + dyr * dyr);
            (
                s,
                [
                    -dxb * ix - dyl * iy,
                    dxb * ix - dyr * iy,
                    -dxt * ix + dyl * iy,
                    dxt * ix + dyr * iy,
                ],
            )
        }
    }

    /// `s(l0 + dl) - s(l0)` without cancellation: each squared edge
    /// difference changes by `D(dl) * D(2 l0 + dl)`.
    #[inline]
    pub fn grad_sq_increment(&self, l0: &[f64; 4], dl: &[f64; 4]) -> f64 {
        let [ix, iy] = self.inv_h;
        let mut sl = [0.0; 4];
        for k in 0..self.corner_count {
            sl[k] = 2.0 * l0[k] + dl[k];
        }
        let edge = |v: &[f64; 4], a: usize, b: usize, inv: f64| (v[b] - v[a]) * inv;
        if self.corner_count == 2 {
            edge(dl, 0, 1, ix) * edge(&sl, 0, 1, ix)
        } else {
            0.5 * (edge(dl, 0, 1, ix) * edge(&sl, 0, 1, ix)
                + edge(dl, 2, 3, ix) * edge(&sl, 2, 3, ix)
                + edge(dl, 0, 2, iy) * edge(&sl, 0, 2, iy)
                + edge(dl, 1, 3, iy) * edge(&sl, 1, 3, iy))
        }
    }

    /// The same cells with every exponent replaced by `p`.
    pub fn with_constant_exponent(&self, p: f64) -> CellSet {
        let mut out = self.clone();
        for c in &mut out.cells {
            c.p = p;
        }
        out
    }

    /// Cell values (corner averages) of `u`.
    pub fn values(&self, u: &[f64]) -> Vec<f64> {
        self.cells.iter().map(|c| self.mean(&self.local(c, u))).collect()
    }

    /// Cell gradient magnitudes of `u`.
    pub fn gradient_magnitudes(&self, u: &[f64]) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| self.grad_sq(&self.local(c, u)).0.sqrt())
            .collect()
    }

    pub fn exponents(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.p).collect()
    }
}
