//! Box-constrained descent for the regularized energies, with continuation
//! in the regularization parameter.
//!
//! Two methods share the same driver: projected gradient with a
//! Barzilai-Borwein step proposal, and a projected Newton-CG method with a
//! Bertsekas-style active set. Both accept a step only if it passes an
//! Armijo test along the projection arc, so the recorded energies never
//! increase. A stage (one value of `eps`) ends when the projected gradient,
//! measured per unit of cell volume, falls below its tolerance.
//!
//! Close to a minimizer the energy decrease of a step is far below the
//! rounding error of the energy itself, so steps are judged by
//! [`Energy::difference`], and the recorded trajectory accumulates those
//! differences from the directly evaluated starting energy.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::parallel::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BarzilaiBorwein,
    Newton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub method: Method,
    /// Final-stage tolerance on the scaled projected gradient; earlier
    /// stages use 100x looser tolerances per remaining stage.
    pub tol: f64,
    pub max_iter: usize,
    pub eps_schedule: Vec<f64>,
    pub execution: Execution,
    /// Start from the minimizer of the same problem with exponent 2 when
    /// the exponent is not identically 2.
    pub warm_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Newton,
            tol: 1e-7,
            max_iter: 20000,
            eps_schedule: vec![1e-2, 1e-4, 1e-8],
            execution: Execution::default(),
            warm_start: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "solver tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if self.eps_schedule.is_empty() || self.eps_schedule.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::InvalidArgument(
                "eps_schedule must be nonempty and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub u: Vec<f64>,
    pub energy_trajectory: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Scaled projected-gradient norm at the returned iterate.
    pub stationarity: f64,
}

/// Minimization problem over the nodes with `free[i]`; all other entries
/// of the starting vector stay fixed.
pub struct Problem<'a> {
    pub energy: &'a Energy<'a>,
    pub free: &'a [bool],
    pub lower: f64,
    pub upper: f64,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

impl Problem<'_> {
    fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }

    /// `max_i |x_i - P(x_i - g_i / vol)|` over free nodes.
    fn stationarity(&self, x: &[f64], g: &[f64]) -> f64 {
        let inv = 1.0 / self.energy.cells.volume;
        x.iter()
            .zip(g)
            .zip(self.free)
            .filter(|(_, f)| **f)
            .map(|((xi, gi), _)| (xi - self.clamp(xi - gi * inv)).abs())
            .fold(0.0, f64::max)
    }

    /// `x + alpha d` projected, with fixed entries untouched.
    fn arc(&self, x: &[f64], d: &[f64], alpha: f64, out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = if self.free[i] {
                self.clamp(x[i] + alpha * d[i])
            } else {
                x[i]
            };
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Stage {
    eps: f64,
    tol: f64,
}

/// Armijo backtracking along the projection arc of direction `d`, starting
/// at step `alpha`. Returns the accepted step with the new point, value and
/// gradient, or `None` if no step decreases the energy.
fn backtrack(
    prob: &Problem,
    eps: f64,
    x: &[f64],
    f: f64,
    g: &[f64],
    d: &[f64],
    mut alpha: f64,
) -> Option<(f64, Vec<f64>, f64, Vec<f64>)> {
    let mut trial = vec![0.0; x.len()];
    for _ in 0..MAX_BACKTRACKS {
        prob.arc(x, d, alpha, &mut trial);
        let step: Vec<f64> = trial.iter().zip(x).map(|(a, b)| a - b).collect();
        let slope = dot(g, &step);
        if slope < 0.0 {
            let change = prob.energy.difference(x, &trial, eps);
            if change <= ARMIJO * slope && change < 0.0 {
                let mut gt = vec![0.0; x.len()];
                prob.energy.value_and_gradient(&trial, eps, &mut gt);
                return Some((alpha, trial, f + change, gt));
            }
        }
        alpha *= 0.5;
    }
    None
}

fn masked(g: &[f64], free: &[bool]) -> Vec<f64> {
    g.iter()
        .zip(free)
        .map(|(v, f)| if *f { *v } else { 0.0 })
        .collect()
}

/// Preconditioned CG on `H_II d = -g_I`; stops early on negative curvature.
fn newton_direction(
    prob: &Problem,
    x: &[f64],
    g: &[f64],
    eps: f64,
    inactive: &[bool],
    rtol: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let h = prob.energy.hessian(x, eps);
    let diag: Vec<f64> = h
        .diagonal(n)
        .into_iter()
        .map(|v| if v > 0.0 { v } else { 1.0 })
        .collect();
    let mut d = vec![0.0; n];
    let mut r: Vec<f64> = (0..n).map(|i| if inactive[i] { -g[i] } else { 0.0 }).collect();
    let r0 = dot(&r, &r).sqrt();
    if r0 == 0.0 {
        return (d, diag);
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, b)| a / b).collect();
    let mut q = z.clone();
    let mut rz = dot(&r, &z);
    let mut hq = vec![0.0; n];
    let max_cg = inactive.iter().filter(|f| **f).count().clamp(1, 2000);
    for it in 0..max_cg {
        h.apply(&q, inactive, &mut hq);
        let curv = dot(&q, &hq);
        if !(curv > 1e-300 * dot(&q, &q)) {
            if it == 0 {
                d.copy_from_slice(&z);
            }
            break;
        }
        let a = rz / curv;
        for i in 0..n {
            d[i] += a * q[i];
            r[i] -= a * hq[i];
        }
        if dot(&r, &r).sqrt() <= rtol * r0 {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            q[i] = z[i] + beta * q[i];
        }
    }
    (d, diag)
}

/// Whether the diagonally scaled correction `-g / diag(H)` changes no free
/// entry by more than a few units in the last place. For `p < 2` the
/// regularized Hessian grows like `eps^{p-2}` on flat cells, and the
/// gradient carries a noise floor of that size times the rounding of `x`;
/// such iterates are stationary to working precision even when the scaled
/// gradient is above the tolerance.
fn precision_limited(prob: &Problem, x: &[f64], g: &[f64], eps: f64) -> bool {
    let diag = prob.energy.hessian(x, eps).diagonal(x.len());
    (0..x.len()).filter(|&i| prob.free[i]).all(|i| {
        let step = if diag[i] > 0.0 {
            prob.clamp(x[i] - g[i] / diag[i]) - x[i]
        } else {
            f64::INFINITY
        };
        step.abs() <= 16.0 * f64::EPSILON * x[i].abs().max(1.0)
    })
}

/// Runs the continuation schedule from `u0`.
pub fn minimize(prob: &Problem, u0: Vec<f64>, opts: &SolverOptions) -> Result<Outcome> {
    opts.validate()?;
    let n = u0.len();
    let mut x: Vec<f64> = u0
        .iter()
        .zip(prob.free)
        .map(|(v, f)| if *f { prob.clamp(*v) } else { *v })
        .collect();
    let mut iterations = 0;
    let any_free = prob.free.iter().any(|f| *f);
    if opts.warm_start && any_free && prob.energy.cells.cells.iter().any(|c| c.p != 2.0) {
        // the quadratic problem is solved in a few Newton steps and puts
        // the iterate near the final profile, which far-from-solution
        // Newton steps for p < 2 do not
        let cells = prob.energy.cells.with_constant_exponent(2.0);
        let energy = Energy {
            cells: &cells,
            ..*prob.energy
        };
        let quad = Problem {
            energy: &energy,
            ..*prob
        };
        let quad_opts = SolverOptions {
            eps_schedule: vec![0.0],
            tol: (opts.tol * 1e4).min(1e-3),
            warm_start: false,
            ..opts.clone()
        };
        let start = minimize(&quad, x, &quad_opts)?;
        debug!("exponent-2 warm start: {} iterations", start.iterations);
        iterations += start.iterations;
        x = start.u;
    }
    let stages: Vec<Stage> = {
        let k = opts.eps_schedule.len();
        opts.eps_schedule
            .iter()
            .enumerate()
            .map(|(i, &eps)| Stage {
                eps,
                tol: opts.tol * 100f64.powi((k - 1 - i) as i32),
            })
            .collect()
    };
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut g = vec![0.0; n];
    let mut stationarity = 0.0;
    let mut f = 0.0;
    let mut prev_eps: Option<f64> = None;

    for stage in &stages {
        let direct = prob.energy.value_and_gradient(&x, stage.eps, &mut g);
        match prev_eps {
            None => {
                f = direct;
                trajectory.push(f);
            }
            Some(e0) => {
                // carry the accumulated energy over exactly
                f += prob.energy.regularization_change(&x, e0, stage.eps);
                trajectory.push(f);
            }
        }
        prev_eps = Some(stage.eps);
        converged = false;
        if !any_free {
            converged = true;
            break;
        }
        let mut bb_alpha: Option<f64> = None;
        loop {
            stationarity = prob.stationarity(&x, &g);
            if stationarity <= stage.tol {
                converged = true;
                break;
            }
            if iterations >= opts.max_iter {
                break;
            }
            let step = match opts.method {
                Method::BarzilaiBorwein => {
                    let gm = masked(&g, prob.free);
                    let d: Vec<f64> = gm.iter().map(|v| -v).collect();
                    let alpha = bb_alpha.unwrap_or_else(|| {
                        let gmax = gm.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        0.1 / gmax.max(f64::MIN_POSITIVE)
                    });
                    backtrack(prob, stage.eps, &x, f, &g, &d, alpha)
                }
                Method::Newton => {
                    let delta = stationarity.min(1e-3);
                    let inactive: Vec<bool> = (0..n)
                        .map(|i| {
                            prob.free[i]
                                && !((x[i] <= prob.lower + delta && g[i] > 0.0)
                                    || (x[i] >= prob.upper - delta && g[i] < 0.0))
                        })
                        .collect();
                    let rtol = stationarity.sqrt().min(1e-2);
                    let (mut d, diag) = newton_direction(prob, &x, &g, stage.eps, &inactive, rtol);
                    for i in 0..n {
                        if prob.free[i] && !inactive[i] {
                            d[i] = -g[i] / diag[i];
                        }
                    }
                    backtrack(prob, stage.eps, &x, f, &g, &d, 1.0).or_else(|| {
                        let d: Vec<f64> = (0..n)
                            .map(|i| if prob.free[i] { -g[i] / diag[i] } else { 0.0 })
                            .collect();
                        backtrack(prob, stage.eps, &x, f, &g, &d, 1.0)
                    })
                }
            };
            let Some((_, xn, fn_, gn)) = step else {
                converged = precision_limited(prob, &x, &g, stage.eps);
                debug!(
                    "line search stalled at eps = {}, stationarity {stationarity:e}, at working precision: {converged}",
                    stage.eps
                );
                break;
            };
            iterations += 1;
            log::trace!(
                "iter {iterations}: energy {:.17e} stationarity {stationarity:e}",
                fn_
            );
            if opts.method == Method::BarzilaiBorwein {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..n {
                    if prob.free[i] {
                        let s = xn[i] - x[i];
                        ss += s * s;
                        sy += s * (gn[i] - g[i]);
                    }
                }
                if sy > 0.0 {
                    bb_alpha = Some((ss / sy).min(1e20));
                }
            }
            x = xn;
            g = gn;
            f = fn_;
            trajectory.push(f);
        }
        debug!(
            "stage eps = {:e}: iterations {iterations}, stationarity {stationarity:e}, energy {f:.17e}",
            stage.eps
        );
    }
    Ok(Outcome {
        u: x,
        energy_trajectory: trajectory,
        iterations,
        converged,
        stationarity,
    })
}
