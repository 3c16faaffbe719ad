//! Thinness, regularity in capacity, zero traces and exceptional sets.
//!
//! Thinness of `E` at `a` is read off the Wiener-type series
//!
//! ```text
//! sum_j ratio_j^{p'(a)-1} ln 2,  ratio_j = C^{B(a,2r_j)}(E ∩ B(a,r_j)) / C^{B(a,2r_j)}(B(a,r_j)),  r_j = 2^-j
//! ```
//!
//! which is the integral `int_0^1 ratio(r)^{p'(a)-1} dr/r` on dyadic scales
//! (each dyadic interval has `dr/r` mass `ln 2`). Both capacities are
//! relative to the closed ball `B(a, 2r_j)`, computed on a grid aligned with
//! the box whose nodes outside the ball are excluded. A finite grid cannot
//! decide convergence, so the classification is a trend policy.

use log::info;
use serde::{Deserialize, Serialize};

use crate::capacity::{relative_capacity, sobolev_capacity, CapacityOptions};
use crate::domain::{GridDomain, GridFunction, Point, Region, SetMask};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Thinness {
    Thin,
    Thick,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThinnessPolicy {
    /// Number of trailing scales the rules look at.
    pub k: usize,
    /// Thick if the last `k` ratios all exceed this.
    pub theta_thick: f64,
    /// Thin needs the fitted decay rate of the last `k + 1` terms at most this...
    pub rho_thin: f64,
    /// ...and each of the last `k` terms below this.
    pub eta: f64,
}

impl Default for ThinnessPolicy {
    fn default() -> Self {
        ThinnessPolicy {
            k: 3,
            theta_thick: 0.5,
            rho_thin: 0.7,
            eta: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThinnessOptions {
    pub capacity: CapacityOptions,
    /// Coarsest dyadic index; scales whose doubled ball leaves the box are
    /// skipped.
    pub first_scale: u32,
    /// Finest dyadic index; by default the last with `r_j >= 2h`.
    pub last_scale: Option<u32>,
    pub policy: ThinnessPolicy,
}

impl Default for ThinnessOptions {
    fn default() -> Self {
        ThinnessOptions {
            capacity: CapacityOptions::default(),
            first_scale: 1,
            last_scale: None,
            policy: ThinnessPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleTerm {
    pub j: u32,
    pub radius: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub term: f64,
    pub partial_sum: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThinnessSeries {
    pub point: Vec<f64>,
    pub p_at_point: f64,
    /// `p'(a) = p(a) / (p(a) - 1)`.
    pub conjugate: f64,
    pub scales: Vec<ScaleTerm>,
    pub classification: Thinness,
}

impl ThinnessSeries {
    pub fn ratios(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s.ratio).collect()
    }

    pub fn terms(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s.term).collect()
    }

    pub fn partial_sums(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s.partial_sum).collect()
    }
}

fn slack(d: &GridDomain) -> f64 {
    1e-9 * d.min_spacing()
}

fn inside_box(d: &GridDomain, x: Point, tol: f64) -> bool {
    let b = d.bounds();
    (0..d.dim()).all(|a| x[a] >= b.lower[a] - tol && x[a] <= b.upper[a] + tol)
}

/// Carries `mask` to a grid aligned with its own; nodes of `to` outside
/// the box of `from` are left out.
fn transfer(mask: &SetMask, from: &GridDomain, to: &GridDomain) -> Result<SetMask> {
    from.check_mask(mask)?;
    let s = slack(from);
    Ok(to.mask_where(|_, x| inside_box(from, x, s) && mask.get(from.nearest_node(x))))
}

/// The box `bx` restricted to the closed ball `B(a, radius)`.
fn ball_domain(bx: &GridDomain, a: Point, radius: f64) -> Result<GridDomain> {
    let dim = bx.dim();
    let lo = [a[0] - radius, a[1] - radius];
    let hi = [a[0] + radius, a[1] + radius];
    bx.aligned_box(
        lo,
        hi,
        vec![Region::Exterior {
            center: a[..dim].to_vec(),
            radius,
        }],
    )
}

/// Scales and cached denominators of the thinness series at one point.
pub struct ThinnessContext {
    bx: GridDomain,
    p: ExponentField,
    a: Point,
    opts: ThinnessOptions,
    scales: Vec<u32>,
    domains: Vec<GridDomain>,
    denominators: Vec<(f64, bool)>,
}

impl ThinnessContext {
    pub fn new(a: Point, p: &ExponentField, bx: &GridDomain, opts: &ThinnessOptions) -> Result<Self> {
        opts.capacity.validate()?;
        if !bx.exclusions().is_empty() {
            return Err(Error::InvalidDomain(
                "thinness is computed on a box without exclusions".into(),
            ));
        }
        if !inside_box(bx, a, 0.0) {
            return Err(Error::Precondition(format!(
                "point {:?} is outside the box",
                &a[..bx.dim()]
            )));
        }
        let p = p.attach(bx)?;
        let h = bx.min_spacing();
        let b = bx.bounds();
        let room = (0..bx.dim())
            .map(|k| (a[k] - b.lower[k]).min(b.upper[k] - a[k]))
            .fold(f64::INFINITY, f64::min);
        let radius = |j: u32| 0.5f64.powi(j as i32);
        let finest = (0..64u32).take_while(|&j| radius(j) >= 2.0 * h).last();
        let last = match (finest, opts.last_scale) {
            (Some(f), Some(l)) => l.min(f),
            (Some(f), None) => f,
            (None, _) => {
                return Err(Error::Precondition(
                    "no dyadic scale is resolved by this grid".into(),
                ));
            }
        };
        let scales: Vec<u32> = (opts.first_scale..=last)
            .filter(|&j| 2.0 * radius(j) <= room + slack(bx))
            .collect();
        if scales.is_empty() {
            return Err(Error::Precondition(format!(
                "scale range is empty: r_j >= {} and 2 r_j <= {room}",
                2.0 * h
            )));
        }
        let domains = scales
            .iter()
            .map(|&j| ball_domain(bx, a, 2.0 * radius(j)))
            .collect::<Result<Vec<_>>>()?;
        let exec = opts.capacity.solver.execution;
        let denominators = exec
            .map_tasks(&domains, |d| {
                let r = 0.5 * ball_radius(d);
                let ball = d.ball_mask(a, r)?;
                let c = relative_capacity(&ball, &p, d, &opts.capacity)?;
                Ok((c.value, c.converged))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(ThinnessContext {
            bx: bx.clone(),
            p,
            a,
            opts: opts.clone(),
            scales,
            domains,
            denominators,
        })
    }

    pub fn scales(&self) -> &[u32] {
        &self.scales
    }

    /// Series for one set `E` on the box.
    pub fn series(&self, e: &SetMask) -> Result<ThinnessSeries> {
        self.bx.check_mask(e)?;
        let a = self.a;
        let pa = self.p.eval(a);
        let conj = pa / (pa - 1.0);
        let exec = self.opts.capacity.solver.execution;
        let numerators = exec
            .map_tasks(&self.domains, |d| {
                let r = 0.5 * ball_radius(d);
                let part = transfer(e, &self.bx, d)?.intersection(&d.ball_mask(a, r)?)?;
                let c = relative_capacity(&part, &self.p, d, &self.opts.capacity)?;
                Ok((c.value, c.converged))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut sum = 0.0;
        let mut scales = Vec::with_capacity(self.scales.len());
        for (i, &j) in self.scales.iter().enumerate() {
            let (num, num_ok) = numerators[i];
            let (den, den_ok) = self.denominators[i];
            let ratio = if num == 0.0 { 0.0 } else { num / den };
            let term = ratio.powf(conj - 1.0) * std::f64::consts::LN_2;
            sum += term;
            info!("scale {j}: ratio {ratio:.6e}, partial sum {sum:.6e}");
            scales.push(ScaleTerm {
                j,
                radius: 0.5f64.powi(j as i32),
                numerator: num,
                denominator: den,
                ratio,
                term,
                partial_sum: sum,
                converged: num_ok && den_ok,
            });
        }
        let mut series = ThinnessSeries {
            point: a[..self.bx.dim()].to_vec(),
            p_at_point: pa,
            conjugate: conj,
            scales,
            classification: Thinness::Inconclusive,
        };
        // too few scales for the policy leaves the series inconclusive
        if let Ok(c) = classify_thinness(&series, &self.opts.policy) {
            series.classification = c;
        }
        Ok(series)
    }
}

/// Radius of the ball a [`ball_domain`] was built for.
fn ball_radius(d: &GridDomain) -> f64 {
    match d.exclusions().first() {
        Some(Region::Exterior { radius, .. }) => *radius,
        _ => unreachable!("ball domains carry one exterior exclusion"),
    }
}

/// Thinness series of `e` at `a`; see [`ThinnessContext`] to reuse the
/// denominators across several sets.
pub fn wiener_partial_sums(
    e: &SetMask,
    a: Point,
    p: &ExponentField,
    bx: &GridDomain,
    opts: &ThinnessOptions,
) -> Result<ThinnessSeries> {
    ThinnessContext::new(a, p, bx, opts)?.series(e)
}

/// Thick if the last `k` ratios all exceed `theta_thick`. Thin if the last
/// `k + 1` terms decay with a least-squares geometric rate at most
/// `rho_thin` and the last `k` terms are below `eta`; vanishing terms count
/// as arbitrarily fast decay. Inconclusive otherwise.
pub fn classify_thinness(series: &ThinnessSeries, policy: &ThinnessPolicy) -> Result<Thinness> {
    let n = series.scales.len();
    if n < 4 || n < policy.k + 1 || policy.k == 0 {
        return Err(Error::Precondition(format!(
            "{n} scales are too few to classify (need at least 4 and k + 1 = {})",
            policy.k + 1
        )));
    }
    let tail = &series.scales[n - policy.k..];
    if tail.iter().all(|s| s.ratio > policy.theta_thick) {
        return Ok(Thinness::Thick);
    }
    let fit = &series.scales[n - policy.k - 1..];
    if fit.iter().all(|s| s.term == 0.0) {
        return Ok(Thinness::Thin);
    }
    let ys: Vec<f64> = fit.iter().map(|s| s.term.max(f64::MIN_POSITIVE).ln()).collect();
    let m = ys.len() as f64;
    let xbar = (m - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xbar;
        sxy += dx * (y - ybar);
        sxx += dx * dx;
    }
    let rate = (sxy / sxx).exp();
    if rate <= policy.rho_thin && tail.iter().all(|s| s.term < policy.eta) {
        Ok(Thinness::Thin)
    } else {
        Ok(Thinness::Inconclusive)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityVariant {
    /// `C(B(x,r) \ Omega)` on a box padded around the domain.
    Sobolev,
    /// `C^{closure}(B(x,r) ∩ boundary)` on the domain itself.
    Relative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularityOptions {
    pub capacity: CapacityOptions,
    pub variant: CapacityVariant,
    /// Re-run on a twice finer grid and judge the trend.
    pub multiresolution: bool,
    /// A refined normalized capacity below this fraction of the coarse one
    /// counts as shrinking toward zero. Zero-capacity sets decay only like
    /// `1 / log(1/h)` in the plane, so the margin is small.
    pub shrink_threshold: f64,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        RegularityOptions {
            capacity: CapacityOptions::default(),
            variant: CapacityVariant::Sobolev,
            multiresolution: true,
            shrink_threshold: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusCapacity {
    pub radius: f64,
    pub capacity: f64,
    /// Capacity of the whole ball `B(x, r)` computed the same way.
    pub ball_capacity: f64,
    /// `capacity / ball_capacity`.
    pub ratio: f64,
    /// `ratio` on the twice finer grid.
    pub refined_ratio: Option<f64>,
    /// `refined_ratio / ratio`.
    pub trend: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub point: Vec<f64>,
    pub variant: CapacityVariant,
    pub radii: Vec<RadiusCapacity>,
    /// Every capacity exceeds `tol`.
    pub positive: bool,
    /// Some normalized capacity shrinks under refinement.
    pub shrinking: bool,
    pub regular: bool,
}

/// Open set of `omega` on another aligned grid: strictly inside its box
/// and outside its exclusions.
fn omega_nodes(omega: &GridDomain, on: &GridDomain) -> Result<SetMask> {
    let s = slack(omega);
    let b = omega.bounds();
    let inside =
        on.mask_where(|_, x| (0..omega.dim()).all(|a| x[a] > b.lower[a] + s && x[a] < b.upper[a] - s));
    let excl = crate::domain::regions_mask(on, omega.exclusions())?;
    inside.difference(&excl)
}

struct Measured {
    capacity: f64,
    ball: f64,
    converged: bool,
}

fn complement_capacity(
    omega: &GridDomain,
    x: Point,
    r: f64,
    p: &ExponentField,
    opts: &RegularityOptions,
) -> Result<Measured> {
    let (set, ball) = match opts.variant {
        CapacityVariant::Sobolev => {
            // padding fixed in physical units so refinement sees the same box
            let b = omega.bounds();
            let pad = 2.0 * r;
            let lo = [b.lower[0] - pad, b.lower.get(1).map_or(0.0, |v| v - pad)];
            let hi = [b.upper[0] + pad, b.upper.get(1).map_or(0.0, |v| v + pad)];
            let bx = omega.aligned_box(lo, hi, vec![])?;
            let ball = bx.ball_mask(x, r)?;
            let set = ball.difference(&omega_nodes(omega, &bx)?)?;
            (
                sobolev_capacity(&set, p, &bx, &opts.capacity)?,
                sobolev_capacity(&ball, p, &bx, &opts.capacity)?,
            )
        }
        CapacityVariant::Relative => {
            let ball = omega.ball_mask(x, r)?.intersection(&omega.closure_mask())?;
            let set = ball.intersection(&omega.omega_boundary_mask())?;
            (
                relative_capacity(&set, p, omega, &opts.capacity)?,
                relative_capacity(&ball, p, omega, &opts.capacity)?,
            )
        }
    };
    Ok(Measured {
        capacity: set.value,
        ball: ball.value,
        converged: set.converged && ball.converged,
    })
}

/// Capacities of the complement of `omega` (or of its boundary, for the
/// relative variant) in balls around the boundary point `x`.
///
/// Discrete capacities of a fixed set drift with `h` because the set is
/// thickened by one cell, so the refinement trend is judged on each
/// capacity divided by that of the whole ball at the same resolution. The
/// drift cancels to first order in that ratio, while sets of zero capacity
/// still make it decay.
pub fn regular_in_capacity_check(
    omega: &GridDomain,
    x: Point,
    p: &ExponentField,
    radii: &[f64],
    tol: f64,
    opts: &RegularityOptions,
) -> Result<RegularityReport> {
    opts.capacity.validate()?;
    let k = omega.nearest_node(x);
    let node = omega.node_point(k);
    let h = omega.min_spacing();
    let off = ((node[0] - x[0]).powi(2) + (node[1] - x[1]).powi(2)).sqrt();
    if !omega.is_boundary(k) || off > 0.5 * h {
        return Err(Error::Precondition(format!(
            "{:?} is not a boundary point",
            &x[..omega.dim()]
        )));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r >= 2.0 * h - slack(omega))) {
        return Err(Error::InvalidArgument(format!(
            "radii must be nonempty and at least 2h = {}",
            2.0 * h
        )));
    }
    let fine = if opts.multiresolution {
        Some(omega.refine(2)?)
    } else {
        None
    };
    let exec = opts.capacity.solver.execution;
    let per_radius = exec
        .map_tasks(radii, |&r| {
            let m = complement_capacity(omega, node, r, p, opts)?;
            let refined = match &fine {
                Some(f) => Some(complement_capacity(f, node, r, p, opts)?),
                None => None,
            };
            let ratio = m.capacity / m.ball;
            let refined_ratio = refined.as_ref().map(|v| v.capacity / v.ball);
            info!(
                "radius {r}: capacity {:.6e}, ratio {ratio:.6e}, refined {refined_ratio:?}",
                m.capacity
            );
            Ok(RadiusCapacity {
                radius: r,
                capacity: m.capacity,
                ball_capacity: m.ball,
                ratio,
                refined_ratio,
                trend: refined_ratio.map(|v| if ratio > 0.0 { v / ratio } else { 0.0 }),
                converged: m.converged && refined.is_none_or(|v| v.converged),
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let positive = per_radius.iter().all(|r| r.capacity > tol);
    let shrinking = per_radius
        .iter()
        .any(|r| r.trend.is_some_and(|t| t < opts.shrink_threshold));
    Ok(RegularityReport {
        point: node[..omega.dim()].to_vec(),
        variant: opts.variant,
        radii: per_radius,
        positive,
        shrinking,
        regular: positive && !shrinking,
    })
}

#[derive(Clone, Debug)]
pub struct ZeroTraceReport {
    /// Boundary nodes of the closure where `|u| > tol_value`.
    pub exceptional: SetMask,
    pub capacity: f64,
    pub zero_trace: bool,
}

/// Whether `u` vanishes on the boundary of `omega` up to a set of relative
/// capacity at most `tol_cap`.
pub fn zero_trace_check(
    u: &GridFunction,
    omega: &GridDomain,
    p: &ExponentField,
    tol_value: f64,
    tol_cap: f64,
    opts: &CapacityOptions,
) -> Result<ZeroTraceReport> {
    omega.check_function(u)?;
    let bd = omega.omega_boundary_mask();
    let exceptional = omega.mask_where(|k, _| bd.get(k) && u.values()[k].abs() > tol_value);
    let capacity = relative_capacity(&exceptional, p, omega, opts)?.value;
    Ok(ZeroTraceReport {
        exceptional,
        capacity,
        zero_trace: capacity <= tol_cap,
    })
}

#[derive(Clone, Debug)]
pub struct ExceptionalSet {
    pub mask: SetMask,
    pub capacity: f64,
}

/// Nodes of the closure where both of the last two increments of the
/// sequence exceed `tol`, with their relative capacity.
pub fn convergence_exceptional_set(
    seq: &[GridFunction],
    tol: f64,
    omega: &GridDomain,
    p: &ExponentField,
    opts: &CapacityOptions,
) -> Result<ExceptionalSet> {
    if seq.len() < 3 {
        return Err(Error::Precondition("need at least three functions".into()));
    }
    for u in seq {
        omega.check_function(u)?;
    }
    let n = seq.len();
    let (a, b, c) = (seq[n - 3].values(), seq[n - 2].values(), seq[n - 1].values());
    let mask = omega
        .mask_where(|k, _| !omega.is_excluded(k) && (b[k] - a[k]).abs() > tol && (c[k] - b[k]).abs() > tol);
    let capacity = relative_capacity(&mask, p, omega, opts)?.value;
    Ok(ExceptionalSet { mask, capacity })
}
