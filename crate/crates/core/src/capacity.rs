//! Sobolev and relative p(.)-capacities of node sets.
//!
//! Both are computed by minimizing the Sobolev modular over grid functions
//! with `u = 1` on a dilation of the set and `0 <= u <= 1` elsewhere. The
//! Sobolev capacity works over the whole computational box. The relative
//! capacity works over the closure of a domain with exclusions: excluded
//! nodes carry no cells and nothing ties `u` to 0 on the boundary of the
//! domain. Every feasible grid function certifies an upper bound, so the
//! reported values are upper bounds for the discrete problem.

use log::info;
use serde::{Deserialize, Serialize};

use crate::cells::CellSet;
use crate::domain::{GridDomain, GridFunction, SetMask};
use crate::energy::{Energy, GradWeight, PowerMass};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::modular::sobolev_modular;
use crate::solver::{minimize, Problem, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityOptions {
    pub solver: SolverOptions,
    /// Dilation radii in cells, solved in order; the last is reported.
    pub dilation_schedule: Vec<usize>,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions {
            solver: SolverOptions::default(),
            dilation_schedule: vec![2, 1],
        }
    }
}

impl CapacityOptions {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.dilation_schedule.is_empty() {
            return Err(Error::InvalidArgument(
                "dilation_schedule must be nonempty".into(),
            ));
        }
        if self.dilation_schedule.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "dilation_schedule must be non-increasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ObstacleSolution {
    pub u: GridFunction,
    /// Unregularized Sobolev modular of `u`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trajectory: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelValue {
    pub dilation_level: usize,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct CapacityResult {
    pub value: f64,
    pub minimizer: GridFunction,
    pub dilation_level: usize,
    /// Total over all levels.
    pub iterations: usize,
    /// Every level converged.
    pub converged: bool,
    pub solver_tol: f64,
    pub levels: Vec<LevelValue>,
    /// Trajectory of the reported level.
    pub energy_trajectory: Vec<f64>,
}

fn solve_obstacle(
    domain: &GridDomain,
    p: &ExponentField,
    obstacle: &SetMask,
    zero_set: Option<&SetMask>,
    start: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<ObstacleSolution> {
    domain.check_mask(obstacle)?;
    if obstacle.is_empty() {
        return Err(Error::Precondition("obstacle set is empty".into()));
    }
    if let Some(z) = zero_set {
        domain.check_mask(z)?;
        if obstacle.indices().any(|k| z.get(k)) {
            return Err(Error::Precondition("obstacle and zero set overlap".into()));
        }
    }
    let p = p.attach(domain)?;
    let cells = CellSet::new(domain, &p, true);
    let n = domain.node_count();
    let mut touched = vec![false; n];
    for c in &cells.cells {
        for k in 0..cells.corner_count {
            touched[c.corners[k]] = true;
        }
    }
    let free: Vec<bool> = (0..n)
        .map(|k| touched[k] && !obstacle.get(k) && !zero_set.is_some_and(|z| z.get(k)))
        .collect();
    let u0: Vec<f64> = (0..n)
        .map(|k| {
            if obstacle.get(k) {
                1.0
            } else if free[k] {
                start.map_or(0.0, |s| s[k].clamp(0.0, 1.0))
            } else {
                0.0
            }
        })
        .collect();
    let energy = Energy {
        cells: &cells,
        weight: GradWeight::Unit,
        lower: &PowerMass,
        exec: opts.execution,
    };
    let prob = Problem {
        energy: &energy,
        free: &free,
        lower: 0.0,
        upper: 1.0,
    };
    let out = if start.is_some() {
        // a supplied start is already close; do not replace it
        let opts = SolverOptions {
            warm_start: false,
            ..opts.clone()
        };
        minimize(&prob, u0, &opts)?
    } else {
        minimize(&prob, u0, opts)?
    };
    let u = GridFunction::new(domain, out.u)?;
    let value = sobolev_modular(&u, &p, domain)?;
    Ok(ObstacleSolution {
        u,
        value,
        iterations: out.iterations,
        converged: out.converged,
        energy_trajectory: out.energy_trajectory,
    })
}

/// Minimizes the Sobolev modular over the active cells of `domain` subject
/// to `u = 1` on `obstacle`, `u = 0` on `zero_set` and on nodes outside the
/// closure, and `0 <= u <= 1`.
pub fn minimize_obstacle_modular(
    domain: &GridDomain,
    p: &ExponentField,
    obstacle: &SetMask,
    zero_set: &SetMask,
    opts: &SolverOptions,
) -> Result<ObstacleSolution> {
    solve_obstacle(domain, p, obstacle, Some(zero_set), None, opts)
}

fn empty_result(domain: &GridDomain, opts: &CapacityOptions) -> CapacityResult {
    CapacityResult {
        value: 0.0,
        minimizer: GridFunction::zeros(domain),
        dilation_level: *opts.dilation_schedule.last().unwrap_or(&0),
        iterations: 0,
        converged: true,
        solver_tol: opts.solver.tol,
        levels: Vec::new(),
        energy_trajectory: vec![0.0],
    }
}

/// Runs the dilation schedule; `obstacle_at(k)` gives the obstacle for level
/// `k`. Each level starts from the previous minimizer, which stays feasible
/// because the obstacles shrink.
fn run_schedule(
    domain: &GridDomain,
    p: &ExponentField,
    opts: &CapacityOptions,
    obstacle_at: impl Fn(usize) -> Result<SetMask>,
) -> Result<CapacityResult> {
    let mut levels = Vec::new();
    let mut last: Option<ObstacleSolution> = None;
    let mut iterations = 0;
    let mut converged = true;
    for &k in &opts.dilation_schedule {
        let obstacle = obstacle_at(k)?;
        let start = last.as_ref().map(|s| s.u.values());
        let sol = solve_obstacle(domain, p, &obstacle, None, start, &opts.solver)?;
        info!(
            "dilation {k}: value {:.12e}, iterations {}, converged {}",
            sol.value, sol.iterations, sol.converged
        );
        iterations += sol.iterations;
        converged &= sol.converged;
        levels.push(LevelValue {
            dilation_level: k,
            value: sol.value,
            iterations: sol.iterations,
            converged: sol.converged,
        });
        last = Some(sol);
    }
    let sol = last.expect("schedule is nonempty");
    Ok(CapacityResult {
        value: sol.value,
        minimizer: sol.u,
        dilation_level: *opts.dilation_schedule.last().unwrap(),
        iterations,
        converged,
        solver_tol: opts.solver.tol,
        levels,
        energy_trajectory: sol.energy_trajectory,
    })
}

/// Sobolev p(.)-capacity of `e` on the computational box `bx`, which must
/// not carry exclusions.
pub fn sobolev_capacity(
    e: &SetMask,
    p: &ExponentField,
    bx: &GridDomain,
    opts: &CapacityOptions,
) -> Result<CapacityResult> {
    opts.validate()?;
    bx.check_mask(e)?;
    if !bx.exclusions().is_empty() {
        return Err(Error::InvalidDomain(
            "the Sobolev capacity is computed on a box without exclusions".into(),
        ));
    }
    if e.is_empty() {
        return Ok(empty_result(bx, opts));
    }
    run_schedule(bx, p, opts, |k| bx.dilate(e, k))
}

/// Relative p(.)-capacity of `e` with respect to the domain `omega`; the
/// obstacle is the dilation of `e` intersected with the closure.
pub fn relative_capacity(
    e: &SetMask,
    p: &ExponentField,
    omega: &GridDomain,
    opts: &CapacityOptions,
) -> Result<CapacityResult> {
    opts.validate()?;
    omega.check_mask(e)?;
    let closure = omega.closure_mask();
    if !e.is_subset_of(&closure)? {
        return Err(Error::Precondition(
            "set is not contained in the closure of the domain".into(),
        ));
    }
    if e.is_empty() {
        return Ok(empty_result(omega, opts));
    }
    run_schedule(omega, p, opts, |k| omega.dilate(e, k)?.intersection(&closure))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub cap_set: f64,
    pub cap_boundary: f64,
    /// `|cap_set - cap_boundary| / max(cap_set, cap_boundary)`.
    pub relative_gap: f64,
    pub boundary_nodes: usize,
}

/// Relative capacities of a closed set and of its grid boundary (the nodes
/// of the set with a neighbour outside it, together with its nodes on the
/// boundary of the domain), which coincide for closed sets in the continuum.
pub fn boundary_capacity_identity(
    f: &SetMask,
    p: &ExponentField,
    omega: &GridDomain,
    opts: &CapacityOptions,
) -> Result<IdentityReport> {
    let boundary = omega
        .inner_boundary(f)?
        .union(&f.intersection(&omega.boundary_mask())?)?;
    if boundary.is_empty() {
        return Err(Error::Precondition("set has no boundary nodes".into()));
    }
    let cap_set = relative_capacity(f, p, omega, opts)?.value;
    let cap_boundary = relative_capacity(&boundary, p, omega, opts)?.value;
    let big = cap_set.max(cap_boundary);
    Ok(IdentityReport {
        cap_set,
        cap_boundary,
        relative_gap: if big > 0.0 {
            (cap_set - cap_boundary).abs() / big
        } else {
            0.0
        },
        boundary_nodes: boundary.count(),
    })
}
