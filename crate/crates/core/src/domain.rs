//! Uniform tensor grids on axis-aligned boxes in one or two dimensions, node
//! masks, grid functions and the discrete gradient.
//!
//! Nodes are numbered with the x index running fastest: `k = i + nx * j`.
//! Cell `(i, j)` has corners `(i, j), (i+1, j), (i, j+1), (i+1, j+1)`.
//! A non-rectangular domain is the box minus the nodes covered by a list of
//! exclusion [`Region`]s; cells with an excluded corner are not part of it.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported node count per axis.
pub const MAX_NODES_PER_AXIS: usize = 1025;

/// A point in the plane; the second coordinate is unused (zero) in 1D.
pub type Point = [f64; 2];

/// Identity shared by a domain and every mask or function built on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DomainId(u64);

impl DomainId {
    fn fresh() -> Self {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        DomainId(NEXT.fetch_add(1, Ordering::Relaxed))
    }
}

/// Geometric primitive used both for exclusions and for sets `E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Region {
    /// Closed axis-aligned rectangle (an interval in 1D).
    Rect { lower: Vec<f64>, upper: Vec<f64> },
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Nodes within half a cell of the segment.
    Segment { from: Vec<f64>, to: Vec<f64> },
    /// The node nearest to each listed point.
    Points { points: Vec<Vec<f64>> },
    /// Complement of the closed ball.
    Exterior { center: Vec<f64>, radius: f64 },
    /// Every node.
    All,
}

fn to_point(v: &[f64], dim: usize) -> Result<Point> {
    if v.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "expected a {dim}-dimensional point, got {} coordinates",
            v.len()
        )));
    }
    Ok([v[0], if dim > 1 { v[1] } else { 0.0 }])
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn dist_to_segment(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(x, a);
    }
    let t = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(x, [a[0] + t * d[0], a[1] + t * d[1]])
}

impl Region {
    /// Nodes of `domain` covered by the region.
    pub fn mask(&self, domain: &GridDomain) -> Result<SetMask> {
        let dim = domain.dim();
        let n = domain.node_count();
        let mut bits = vec![false; n];
        // relative slack so that nodes on a region boundary count as inside
        let slack = 1e-9 * domain.min_spacing();
        match self {
            Region::Rect { lower, upper } => {
                let lo = to_point(lower, dim)?;
                let hi = to_point(upper, dim)?;
                for (k, b) in bits.iter_mut().enumerate() {
                    let x = domain.node_point(k);
                    *b = (0..dim).all(|a| x[a] >= lo[a] - slack && x[a] <= hi[a] + slack);
                }
            }
            Region::Ball { center, radius } => {
                let c = to_point(center, dim)?;
                for (k, b) in bits.iter_mut().enumerate() {
                    *b = dist(domain.node_point(k), c) <= radius + slack;
                }
            }
            Region::Exterior { center, radius } => {
                let c = to_point(center, dim)?;
                for (k, b) in bits.iter_mut().enumerate() {
                    *b = dist(domain.node_point(k), c) > radius + slack;
                }
            }
            Region::Segment { from, to } => {
                let a = to_point(from, dim)?;
                let bpt = to_point(to, dim)?;
                let reach = 0.5 * domain.min_spacing() + slack;
                for (k, b) in bits.iter_mut().enumerate() {
                    *b = dist_to_segment(domain.node_point(k), a, bpt) <= reach;
                }
            }
            Region::Points { points } => {
                for p in points {
                    let k = domain.nearest_node(to_point(p, dim)?);
                    bits[k] = true;
                }
            }
            Region::All => bits.iter_mut().for_each(|b| *b = true),
        }
        Ok(SetMask {
            domain: domain.id,
            bits,
        })
    }
}

/// Union of the masks of several regions.
pub fn regions_mask(domain: &GridDomain, regions: &[Region]) -> Result<SetMask> {
    let mut m = domain.empty_mask();
    for r in regions {
        let rm = r.mask(domain)?;
        m = m.union(&rm)?;
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        BoxBounds { lower, upper }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        BoxBounds::new(vec![lo], vec![hi])
    }

    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Self {
        BoxBounds::new(lo.to_vec(), hi.to_vec())
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }
}

#[derive(Clone, Debug)]
pub struct GridDomain {
    id: DomainId,
    bounds: BoxBounds,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    exclusions: Vec<Region>,
    excluded: Vec<bool>,
    boundary: Vec<bool>,
}

impl PartialEq for GridDomain {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

/// Uniform grid on `bounds` with `counts` nodes per axis.
pub fn build_grid(bounds: BoxBounds, counts: &[usize]) -> Result<GridDomain> {
    GridDomain::new(bounds, counts, Vec::new())
}

impl GridDomain {
    pub fn new(bounds: BoxBounds, counts: &[usize], exclusions: Vec<Region>) -> Result<Self> {
        let dim = counts.len();
        if !(1..=2).contains(&dim) || bounds.lower.len() != dim || bounds.upper.len() != dim {
            return Err(Error::InvalidDomain(
                "dimension must be 1 or 2 and match the bounds".into(),
            ));
        }
        for a in 0..dim {
            let (lo, hi) = (bounds.lower[a], bounds.upper[a]);
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidDomain(format!(
                    "degenerate box on axis {a}: [{lo}, {hi}]"
                )));
            }
            if counts[a] < 3 {
                return Err(Error::InvalidDomain(format!(
                    "resolution {} on axis {a} is below the minimum of 3 nodes",
                    counts[a]
                )));
            }
            if counts[a] > MAX_NODES_PER_AXIS {
                return Err(Error::InvalidDomain(format!(
                    "resolution {} on axis {a} exceeds {MAX_NODES_PER_AXIS} nodes",
                    counts[a]
                )));
            }
        }
        let spacing = (0..dim)
            .map(|a| (bounds.upper[a] - bounds.lower[a]) / (counts[a] - 1) as f64)
            .collect();
        let n: usize = counts.iter().product();
        let mut dom = GridDomain {
            id: DomainId::fresh(),
            bounds,
            counts: counts.to_vec(),
            spacing,
            exclusions: Vec::new(),
            excluded: vec![false; n],
            boundary: vec![false; n],
        };
        if !exclusions.is_empty() {
            let m = regions_mask(&dom, &exclusions)?;
            dom.excluded = m.bits;
            dom.exclusions = exclusions;
        }
        dom.boundary = dom.compute_boundary();
        Ok(dom)
    }

    fn compute_boundary(&self) -> Vec<bool> {
        (0..self.node_count())
            .map(|k| {
                if self.excluded[k] || self.on_box_boundary(k) {
                    return true;
                }
                self.neighbors8(k).any(|m| self.excluded[m])
            })
            .collect()
    }

    pub fn id(&self) -> DomainId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn exclusions(&self) -> &[Region] {
        &self.exclusions
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn nx(&self) -> usize {
        self.counts[0]
    }

    pub fn ny(&self) -> usize {
        self.counts.get(1).copied().unwrap_or(1)
    }

    pub fn node_count(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn cell_counts(&self) -> (usize, usize) {
        let cy = if self.dim() == 2 { self.ny() - 1 } else { 1 };
        (self.nx() - 1, cy)
    }

    pub fn cell_count(&self) -> usize {
        let (cx, cy) = self.cell_counts();
        cx * cy
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Volume of the box (including excluded parts).
    pub fn volume(&self) -> f64 {
        self.bounds.volume()
    }

    /// Volume of the active cells.
    pub fn active_volume(&self) -> f64 {
        let active = (0..self.cell_count()).filter(|&c| self.cell_active(c)).count();
        active as f64 * self.cell_volume()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + self.nx() * j
    }

    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx(), k / self.nx())
    }

    pub fn node_point(&self, k: usize) -> Point {
        let (i, j) = self.node_ij(k);
        let x = self.bounds.lower[0] + i as f64 * self.spacing[0];
        let y = if self.dim() == 2 {
            self.bounds.lower[1] + j as f64 * self.spacing[1]
        } else {
            0.0
        };
        [x, y]
    }

    /// Coordinates of the node along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis])
            .map(|i| self.bounds.lower[axis] + i as f64 * self.spacing[axis])
            .collect()
    }

    pub fn nearest_node(&self, x: Point) -> usize {
        let idx = |a: usize| {
            let t = ((x[a] - self.bounds.lower[a]) / self.spacing[a]).round();
            t.clamp(0.0, (self.counts[a] - 1) as f64) as usize
        };
        let i = idx(0);
        let j = if self.dim() == 2 { idx(1) } else { 0 };
        self.node_index(i, j)
    }

    pub fn contains_point(&self, x: Point) -> bool {
        (0..self.dim()).all(|a| x[a] >= self.bounds.lower[a] && x[a] <= self.bounds.upper[a])
    }

    pub fn on_box_boundary(&self, k: usize) -> bool {
        let (i, j) = self.node_ij(k);
        let edge_x = i == 0 || i + 1 == self.nx();
        if self.dim() == 1 {
            edge_x
        } else {
            edge_x || j == 0 || j + 1 == self.ny()
        }
    }

    /// Chebyshev (8-connected in 2D) neighbours.
    pub fn neighbors8(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.node_ij(k);
        let (nx, ny) = (self.nx() as isize, self.ny() as isize);
        let dj: &[isize] = if self.dim() == 2 { &[-1, 0, 1] } else { &[0] };
        dj.iter()
            .flat_map(move |&b| [-1isize, 0, 1].into_iter().map(move |a| (a, b)))
            .filter(|&(a, b)| a != 0 || b != 0)
            .filter_map(move |(a, b)| {
                let (ii, jj) = (i as isize + a, j as isize + b);
                (ii >= 0 && jj >= 0 && ii < nx && jj < ny).then(|| self.node_index(ii as usize, jj as usize))
            })
    }

    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        let (cx, _) = self.cell_counts();
        (c % cx, c / cx)
    }

    /// Corner node indices: `[ll, lr]` in 1D, `[ll, lr, ul, ur]` in 2D.
    pub fn cell_corners(&self, c: usize) -> ([usize; 4], usize) {
        let (i, j) = self.cell_ij(c);
        if self.dim() == 1 {
            ([i, i + 1, 0, 0], 2)
        } else {
            let ll = self.node_index(i, j);
            let ul = self.node_index(i, j + 1);
            ([ll, ll + 1, ul, ul + 1], 4)
        }
    }

    pub fn cell_center(&self, c: usize) -> Point {
        let (i, j) = self.cell_ij(c);
        let x = self.bounds.lower[0] + (i as f64 + 0.5) * self.spacing[0];
        let y = if self.dim() == 2 {
            self.bounds.lower[1] + (j as f64 + 0.5) * self.spacing[1]
        } else {
            0.0
        };
        [x, y]
    }

    /// A cell belongs to the domain when none of its corners is excluded.
    pub fn cell_active(&self, c: usize) -> bool {
        let (corners, m) = self.cell_corners(c);
        corners[..m].iter().all(|&k| !self.excluded[k])
    }

    pub fn empty_mask(&self) -> SetMask {
        SetMask {
            domain: self.id,
            bits: vec![false; self.node_count()],
        }
    }

    pub fn full_mask(&self) -> SetMask {
        SetMask {
            domain: self.id,
            bits: vec![true; self.node_count()],
        }
    }

    pub fn mask_from_bits(&self, bits: Vec<bool>) -> Result<SetMask> {
        if bits.len() != self.node_count() {
            return Err(Error::InvalidArgument(format!(
                "mask length {} does not match node count {}",
                bits.len(),
                self.node_count()
            )));
        }
        Ok(SetMask {
            domain: self.id,
            bits,
        })
    }

    pub fn mask_where(&self, f: impl Fn(usize, Point) -> bool) -> SetMask {
        SetMask {
            domain: self.id,
            bits: (0..self.node_count()).map(|k| f(k, self.node_point(k))).collect(),
        }
    }

    /// Nodes removed from the box (outside the open set).
    pub fn excluded_mask(&self) -> SetMask {
        SetMask {
            domain: self.id,
            bits: self.excluded.clone(),
        }
    }

    /// Box boundary nodes, excluded nodes and active nodes next to them.
    pub fn boundary_mask(&self) -> SetMask {
        SetMask {
            domain: self.id,
            bits: self.boundary.clone(),
        }
    }

    pub fn interior_mask(&self) -> SetMask {
        self.boundary_mask().complement()
    }

    /// Nodes of the closure of the domain: every node that is not excluded.
    pub fn closure_mask(&self) -> SetMask {
        self.excluded_mask().complement()
    }

    /// Boundary nodes that belong to the closure.
    pub fn omega_boundary_mask(&self) -> SetMask {
        SetMask {
            domain: self.id,
            bits: self
                .boundary
                .iter()
                .zip(&self.excluded)
                .map(|(b, e)| *b && !*e)
                .collect(),
        }
    }

    pub fn is_excluded(&self, k: usize) -> bool {
        self.excluded[k]
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    /// The same box and regions on a grid with `factor` times finer spacing.
    pub fn refine(&self, factor: usize) -> Result<GridDomain> {
        let counts: Vec<usize> = self.counts.iter().map(|c| (c - 1) * factor + 1).collect();
        GridDomain::new(self.bounds.clone(), &counts, self.exclusions.clone())
    }

    /// A box with the same spacing whose grid lines coincide with this grid's,
    /// covering at least `[lower, upper]`. It may extend beyond the original box.
    pub fn aligned_box(&self, lower: Point, upper: Point, exclusions: Vec<Region>) -> Result<GridDomain> {
        let dim = self.dim();
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        let mut counts = Vec::with_capacity(dim);
        for a in 0..dim {
            let h = self.spacing[a];
            let o = self.bounds.lower[a];
            let i0 = ((lower[a] - o) / h - 1e-9).floor();
            let i1 = ((upper[a] - o) / h + 1e-9).ceil();
            let n = ((i1 - i0) as usize + 1).max(3);
            lo.push(o + i0 * h);
            hi.push(o + (i0 + (n - 1) as f64) * h);
            counts.push(n);
        }
        GridDomain::new(BoxBounds::new(lo, hi), &counts, exclusions)
    }

    /// Nodes inside the closed ball `B(center, radius)`.
    pub fn ball_mask(&self, center: Point, radius: f64) -> Result<SetMask> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let c: Vec<f64> = center[..self.dim()].to_vec();
        Region::Ball { center: c, radius }.mask(self)
    }

    /// Chebyshev dilation by `cells` grid steps, clipped to the box.
    pub fn dilate(&self, mask: &SetMask, cells: usize) -> Result<SetMask> {
        self.check_mask(mask)?;
        if cells == 0 {
            return Ok(mask.clone());
        }
        // separable: a Chebyshev ball is a product of intervals
        let (nx, ny) = (self.nx(), self.ny());
        let mut rows = vec![false; mask.bits.len()];
        for j in 0..ny {
            let mut last: Option<usize> = None;
            let mut next_true: Vec<Option<usize>> = vec![None; nx];
            let mut nt = None;
            for i in (0..nx).rev() {
                if mask.bits[self.node_index(i, j)] {
                    nt = Some(i);
                }
                next_true[i] = nt;
            }
            for i in 0..nx {
                if mask.bits[self.node_index(i, j)] {
                    last = Some(i);
                }
                let near_left = last.is_some_and(|l| i - l <= cells);
                let near_right = next_true[i].is_some_and(|r| r - i <= cells);
                rows[self.node_index(i, j)] = near_left || near_right;
            }
        }
        if self.dim() == 1 {
            return Ok(SetMask {
                domain: self.id,
                bits: rows,
            });
        }
        let mut out = vec![false; rows.len()];
        for i in 0..nx {
            for j in 0..ny {
                let j0 = j.saturating_sub(cells);
                let j1 = (j + cells).min(ny - 1);
                out[self.node_index(i, j)] = (j0..=j1).any(|jj| rows[self.node_index(i, jj)]);
            }
        }
        Ok(SetMask {
            domain: self.id,
            bits: out,
        })
    }

    /// Nodes of `mask` with at least one 8-neighbour outside it.
    pub fn inner_boundary(&self, mask: &SetMask) -> Result<SetMask> {
        self.check_mask(mask)?;
        Ok(self.mask_where(|k, _| mask.bits[k] && self.neighbors8(k).any(|m| !mask.bits[m])))
    }

    pub fn check_mask(&self, mask: &SetMask) -> Result<()> {
        if mask.domain != self.id || mask.bits.len() != self.node_count() {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn check_function(&self, u: &GridFunction) -> Result<()> {
        if u.domain != self.id || u.values.len() != self.node_count() {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    /// Forward-difference gradient per cell. In 2D each component is the
    /// average of the forward differences along the two cell edges parallel to
    /// that axis. Inactive cells are included; the output has one entry per cell.
    pub fn discrete_gradient(&self, u: &GridFunction) -> Result<Vec<Point>> {
        self.check_function(u)?;
        let v = &u.values;
        Ok((0..self.cell_count())
            .map(|c| {
                let (k, _) = self.cell_corners(c);
                if self.dim() == 1 {
                    [(v[k[1]] - v[k[0]]) / self.spacing[0], 0.0]
                } else {
                    let gx = 0.5 * ((v[k[1]] - v[k[0]]) + (v[k[3]] - v[k[2]])) / self.spacing[0];
                    let gy = 0.5 * ((v[k[2]] - v[k[0]]) + (v[k[3]] - v[k[1]])) / self.spacing[1];
                    [gx, gy]
                }
            })
            .collect())
    }
}

/// Boolean indicator over the nodes of one domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetMask {
    domain: DomainId,
    bits: Vec<bool>,
}

impl SetMask {
    pub fn domain_id(&self) -> DomainId {
        self.domain
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, k: usize) -> bool {
        self.bits[k]
    }

    pub fn set(&mut self, k: usize, value: bool) {
        self.bits[k] = value;
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(k, b)| b.then_some(k))
    }

    fn zip_with(&self, other: &SetMask, f: impl Fn(bool, bool) -> bool) -> Result<SetMask> {
        if self.domain != other.domain || self.bits.len() != other.bits.len() {
            return Err(Error::DomainMismatch);
        }
        Ok(SetMask {
            domain: self.domain,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn union(&self, other: &SetMask) -> Result<SetMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &SetMask) -> Result<SetMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &SetMask) -> Result<SetMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> SetMask {
        SetMask {
            domain: self.domain,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &SetMask) -> Result<bool> {
        Ok(self.difference(other)?.is_empty())
    }
}

/// Real value per node of one domain; all values are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: DomainId,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: &GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} nodes",
                values.len(),
                domain.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                point: domain.node_point(k)[..domain.dim()].to_vec(),
            });
        }
        Ok(GridFunction {
            domain: domain.id,
            values,
        })
    }

    pub fn zeros(domain: &GridDomain) -> Self {
        GridFunction {
            domain: domain.id,
            values: vec![0.0; domain.node_count()],
        }
    }

    pub fn constant(domain: &GridDomain, c: f64) -> Result<Self> {
        GridFunction::new(domain, vec![c; domain.node_count()])
    }

    pub fn from_fn(domain: &GridDomain, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..domain.node_count())
            .map(|k| f(domain.node_point(k)))
            .collect();
        GridFunction::new(domain, values)
    }

    pub fn from_expr(domain: &GridDomain, e: &crate::expr::Expr) -> Result<Self> {
        let mut values = Vec::with_capacity(domain.node_count());
        for k in 0..domain.node_count() {
            let x = domain.node_point(k);
            values.push(e.eval_checked(&crate::expr::Bindings::at(&x), &x[..domain.dim()])?);
        }
        GridFunction::new(domain, values)
    }

    pub fn domain_id(&self) -> DomainId {
        self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Result<GridFunction> {
        let values: Vec<f64> = self.values.iter().map(|v| c * v).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point: vec![] });
        }
        Ok(GridFunction {
            domain: self.domain,
            values,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance over all nodes.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }
}
