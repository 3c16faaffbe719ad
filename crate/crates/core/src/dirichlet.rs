//! The perturbed p(x)-Laplace Dirichlet problem
//!
//! ```text
//! -div(|grad u|^{p(x)-2} grad u) + B(x, u) = 0 inside,  u = f on the boundary
//! ```
//!
//! solved as the minimizer of
//!
//! ```text
//! J(u) = sum_cells vol * ( (s + eps^2)^{p/2} / p + Phi(x_c, mean u) ),  Phi(x, z) = int_0^z B(x, t) dt
//! ```
//!
//! over the interior nodes, with every boundary node pinned to `f`. An
//! increasing `B` makes `Phi` convex, so `J` is strictly convex and its
//! minimizer is the unique discrete solution. That minimizer is what this
//! module reports as the solution operator `f -> u_f`.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cells::CellSet;
use crate::domain::{GridDomain, GridFunction, Point, SetMask};
use crate::energy::{abs_pow_increment, Energy, GradWeight, LowerOrder};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::expr::{parse, Bindings, Expr, Var};
use crate::quadrature::adaptive_simpson;
use crate::solver::{minimize, Problem, SolverOptions};

/// Absolute tolerance of the numeric primitive.
pub const PRIMITIVE_TOL: f64 = 1e-10;

/// Values of `z` at which monotonicity and growth are sampled.
pub const ZETA_LADDER: [f64; 21] = [
    -100.0, -10.0, -5.0, -2.0, -1.0, -0.5, -0.1, -1e-2, -1e-3, -1e-6, 0.0, 1e-6, 1e-3, 1e-2, 0.1, 0.5, 1.0,
    2.0, 5.0, 10.0, 100.0,
];

/// At most this many nodes are sampled by the structural checks.
const MAX_SAMPLES: usize = 1024;

const POWER_TEXT: &str = "abs(z)^(p-2)*z";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    /// `B = 0`.
    Zero,
    /// `B = |z|^{p-2} z`.
    Power,
    /// `B = z`.
    Linear,
    /// Any other expression in `x, y, z, p`.
    Expression,
}

/// Witness of the growth bound `|B(x, z)| <= a(x) + c |z|^{p(x)-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Growth {
    /// Expression in `x, y`.
    pub a: String,
    pub c: f64,
}

impl Default for Growth {
    fn default() -> Self {
        Growth {
            a: "0".into(),
            c: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    text: String,
    b: Expr,
    kind: PerturbationKind,
    primitive: Option<Expr>,
    growth_a: Expr,
    growth_c: f64,
    monotone_checked: bool,
}

fn bindings(x: Point, p: f64, z: f64) -> Bindings {
    Bindings {
        x: x[0],
        y: x[1],
        z,
        p,
    }
}

/// Nodes of the closure visited by the structural checks.
fn sample_nodes(domain: &GridDomain) -> Vec<usize> {
    let closure: Vec<usize> = domain.closure_mask().indices().collect();
    let stride = closure.len().div_ceil(MAX_SAMPLES).max(1);
    let mut picked: Vec<usize> = closure.iter().copied().step_by(stride).collect();
    if let Some(&last) = closure.last() {
        if picked.last() != Some(&last) {
            picked.push(last);
        }
    }
    picked
}

impl PerturbationSpec {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    pub fn monotone_checked(&self) -> bool {
        self.monotone_checked
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_c
    }

    pub fn growth_witness(&self, x: Point) -> f64 {
        self.growth_a.eval(&bindings(x, 0.0, 0.0))
    }

    pub fn has_analytic_primitive(&self) -> bool {
        self.kind != PerturbationKind::Expression || self.primitive.is_some()
    }

    #[inline]
    pub fn b(&self, x: Point, p: f64, z: f64) -> f64 {
        match self.kind {
            PerturbationKind::Zero => 0.0,
            // written out so that z = 0 gives 0 for p < 2
            PerturbationKind::Power => z.abs().powf(p - 1.0).copysign(z),
            PerturbationKind::Linear => z,
            PerturbationKind::Expression => self.b.eval(&bindings(x, p, z)),
        }
    }

    /// `int_0^z B(x, t) dt`.
    pub fn primitive(&self, x: Point, p: f64, z: f64) -> f64 {
        match self.kind {
            PerturbationKind::Zero => 0.0,
            PerturbationKind::Power => z.abs().powf(p) / p,
            PerturbationKind::Linear => 0.5 * z * z,
            PerturbationKind::Expression => match &self.primitive {
                Some(e) => e.eval(&bindings(x, p, z)),
                None => adaptive_simpson(|t| self.b(x, p, t), 0.0, z, PRIMITIVE_TOL),
            },
        }
    }

    /// Replaces the numeric primitive by an analytic one, after checking it
    /// vanishes at 0 and differentiates to `B` on the sampled ladder.
    pub fn with_primitive(mut self, text: &str, p: &ExponentField, domain: &GridDomain) -> Result<Self> {
        let e = parse(text, &[Var::X, Var::Y, Var::Z, Var::P])?;
        for k in sample_nodes(domain) {
            let x = domain.node_point(k);
            let pk = p.eval(x);
            let at0 = e.eval(&bindings(x, pk, 0.0));
            if !(at0.abs() <= 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "primitive is {at0} at z = 0, point {:?}",
                    &x[..domain.dim()]
                )));
            }
            for &z in &ZETA_LADDER {
                let d = 1e-5 * (1.0 + z.abs());
                let fd = (e.eval(&bindings(x, pk, z + d)) - e.eval(&bindings(x, pk, z - d))) / (2.0 * d);
                let b = self.b(x, pk, z);
                if !((fd - b).abs() <= 1e-5 * (1.0 + b.abs())) {
                    return Err(Error::InvalidArgument(format!(
                        "primitive derivative {fd} differs from B = {b} at z = {z}, point {:?}",
                        &x[..domain.dim()]
                    )));
                }
            }
        }
        self.primitive = Some(e);
        Ok(self)
    }

    /// Samples monotonicity in `z` and the growth bound on [`ZETA_LADDER`]
    /// at up to 1024 nodes of the closure of `domain`.
    pub fn check_structure(&self, p: &ExponentField, domain: &GridDomain) -> Result<()> {
        for k in sample_nodes(domain) {
            let x = domain.node_point(k);
            let pt = x[..domain.dim()].to_vec();
            let pk = p.eval(x);
            let a = self.growth_witness(x);
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "growth witness a = {a} at {pt:?} must be finite and nonnegative"
                )));
            }
            let mut prev: Option<(f64, f64)> = None;
            for &z in &ZETA_LADDER {
                let b = self.b(x, pk, z);
                if !b.is_finite() {
                    return Err(Error::NonFinite { point: pt });
                }
                let bound = a + self.growth_c * z.abs().powf(pk - 1.0);
                if b.abs() > bound * (1.0 + 1e-12) {
                    return Err(Error::GrowthViolation {
                        point: pt,
                        zeta: z,
                        value: b.abs(),
                        bound,
                    });
                }
                if let Some((z0, b0)) = prev {
                    if b0 > b + 1e-12 * b0.abs().max(b.abs()) {
                        return Err(Error::NotMonotone {
                            point: pt,
                            lo: z0,
                            hi: z,
                            b_lo: b0,
                            b_hi: b,
                        });
                    }
                }
                prev = Some((z, b));
            }
        }
        Ok(())
    }
}

/// Parses `B` as an expression in `x, y, z, p` and checks it on `domain`
/// with exponent `p`. `0`, `z` and `abs(z)^(p-2)*z` are recognized and get
/// closed-form primitives; anything else is integrated numerically.
pub fn parse_perturbation(
    text: &str,
    growth: &Growth,
    p: &ExponentField,
    domain: &GridDomain,
) -> Result<PerturbationSpec> {
    let all = [Var::X, Var::Y, Var::Z, Var::P];
    let b = parse(text, &all)?;
    let kind = if b.as_constant() == Some(0.0) {
        PerturbationKind::Zero
    } else if b == parse(POWER_TEXT, &all)? {
        PerturbationKind::Power
    } else if b == Expr::Var(Var::Z) {
        PerturbationKind::Linear
    } else {
        PerturbationKind::Expression
    };
    if !(growth.c >= 0.0 && growth.c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "growth constant must be finite and nonnegative, got {}",
            growth.c
        )));
    }
    let mut spec = PerturbationSpec {
        text: text.to_string(),
        b,
        kind,
        primitive: None,
        growth_a: parse(&growth.a, &[Var::X, Var::Y])?,
        growth_c: growth.c,
        monotone_checked: false,
    };
    spec.check_structure(p, domain)?;
    spec.monotone_checked = true;
    Ok(spec)
}

impl LowerOrder for PerturbationSpec {
    fn value(&self, x: Point, p: f64, z: f64) -> f64 {
        self.primitive(x, p, z)
    }

    fn derivative(&self, x: Point, p: f64, z: f64) -> f64 {
        self.b(x, p, z)
    }

    fn curvature(&self, x: Point, p: f64, z: f64) -> f64 {
        match self.kind {
            PerturbationKind::Zero => 0.0,
            PerturbationKind::Power => (p - 1.0) * z.abs().max(1e-8).powf(p - 2.0),
            PerturbationKind::Linear => 1.0,
            PerturbationKind::Expression => {
                let d = 1e-6 * (1.0 + z.abs());
                ((self.b(x, p, z + d) - self.b(x, p, z - d)) / (2.0 * d)).max(0.0)
            }
        }
    }

    fn increment(&self, x: Point, p: f64, z0: f64, dz: f64) -> f64 {
        match self.kind {
            PerturbationKind::Zero => 0.0,
            PerturbationKind::Power => abs_pow_increment(z0, dz, p) / p,
            PerturbationKind::Linear => dz * (z0 + 0.5 * dz),
            PerturbationKind::Expression => match &self.primitive {
                Some(_) => self.primitive(x, p, z0 + dz) - self.primitive(x, p, z0),
                // over [0, dz] so the rounding of z0 + dz does not enter the width
                None => adaptive_simpson(|t| self.b(x, p, z0 + t), 0.0, dz, PRIMITIVE_TOL),
            },
        }
    }
}

/// A Dirichlet problem: the values of `boundary` on boundary nodes are the
/// data; its other values are ignored.
#[derive(Clone, Debug)]
pub struct DirichletSpec {
    pub domain: GridDomain,
    pub p: ExponentField,
    pub perturbation: PerturbationSpec,
    pub boundary: GridFunction,
}

impl DirichletSpec {
    pub fn new(
        domain: GridDomain,
        p: &ExponentField,
        perturbation: PerturbationSpec,
        boundary: GridFunction,
    ) -> Result<Self> {
        domain.check_function(&boundary)?;
        let p = p.attach(&domain)?;
        perturbation.check_structure(&p, &domain)?;
        Ok(DirichletSpec {
            domain,
            p,
            perturbation,
            boundary,
        })
    }

    /// The same problem with other boundary data.
    pub fn with_boundary(&self, boundary: GridFunction) -> Result<Self> {
        self.domain.check_function(&boundary)?;
        Ok(DirichletSpec {
            boundary,
            ..self.clone()
        })
    }

    /// Whether `p+ < n`, the dimension restriction of the continuum
    /// theory. Reported only; nothing here depends on it.
    pub fn exponent_below_dimension(&self) -> bool {
        self.p.p_plus() < self.domain.dim() as f64
    }

    fn cells(&self) -> CellSet {
        CellSet::new(&self.domain, &self.p, true)
    }

    fn energy<'a>(&'a self, cells: &'a CellSet, opts: &SolverOptions) -> Energy<'a> {
        Energy {
            cells,
            weight: GradWeight::InverseP,
            lower: &self.perturbation,
            exec: opts.execution,
        }
    }
}

/// Starting values of the interior nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Zero,
    /// Uniform between the smallest and largest boundary value.
    Random {
        seed: u64,
    },
    Given(GridFunction),
}

#[derive(Clone, Debug)]
pub struct SolutionReport {
    pub u: GridFunction,
    /// `J(u)` at `eps = 0`.
    pub energy: f64,
    pub energy_trajectory: Vec<f64>,
    /// Sup over interior nodes of the discrete residual.
    pub residual_inf: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stationarity: f64,
}

fn boundary_range(spec: &DirichletSpec) -> (f64, f64) {
    let f = spec.boundary.values();
    let (lo, hi) = spec
        .domain
        .boundary_mask()
        .indices()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
            (lo.min(f[k]), hi.max(f[k]))
        });
    if lo < hi {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (-1.0, 1.0)
    }
}

fn sup_residual(spec: &DirichletSpec, energy: &Energy, u: &[f64]) -> f64 {
    let r = energy.residual(u);
    spec.domain
        .interior_mask()
        .indices()
        .fold(0.0f64, |m, k| m.max(r[k].abs()))
}

/// Minimizes `J` with the boundary nodes pinned. With [`Init::Zero`] the
/// solver may warm start from the exponent-2 problem; other starts are
/// used as given.
pub fn solve_dirichlet(spec: &DirichletSpec, init: &Init, opts: &SolverOptions) -> Result<SolutionReport> {
    opts.validate()?;
    let d = &spec.domain;
    let n = d.node_count();
    let free: Vec<bool> = (0..n).map(|k| !d.is_boundary(k)).collect();
    let f = spec.boundary.values();
    let mut u0: Vec<f64> = f.to_vec();
    match init {
        Init::Zero => {
            for k in 0..n {
                if free[k] {
                    u0[k] = 0.0;
                }
            }
        }
        Init::Random { seed } => {
            let (lo, hi) = boundary_range(spec);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for k in 0..n {
                if free[k] {
                    u0[k] = rng.gen_range(lo..=hi);
                }
            }
        }
        Init::Given(g) => {
            d.check_function(g)?;
            for k in 0..n {
                if free[k] {
                    u0[k] = g.values()[k];
                }
            }
        }
    }
    let opts = match init {
        Init::Zero => opts.clone(),
        _ => SolverOptions {
            warm_start: false,
            ..opts.clone()
        },
    };
    let cells = spec.cells();
    let energy = spec.energy(&cells, &opts);
    let prob = Problem {
        energy: &energy,
        free: &free,
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    let out = minimize(&prob, u0, &opts)?;
    let residual_inf = sup_residual(spec, &energy, &out.u);
    let value = energy.value(&out.u, 0.0);
    info!(
        "dirichlet: energy {value:.12e}, residual {residual_inf:e}, iterations {}, converged {}",
        out.iterations, out.converged
    );
    Ok(SolutionReport {
        u: GridFunction::new(d, out.u)?,
        energy: value,
        energy_trajectory: out.energy_trajectory,
        residual_inf,
        iterations: out.iterations,
        converged: out.converged,
        stationarity: out.stationarity,
    })
}

/// Sup over interior nodes of the discrete residual of `u`: the derivative
/// of the unregularized `J` with respect to each node value per unit cell
/// volume. It is `-div(|grad u|^{p-2} grad u) + B(x, u)` with divergence
/// and gradient composed from the cell stencils and `B` averaged over the
/// cells around the node, the same quadrature the energy uses, so it
/// vanishes at the discrete minimizer.
pub fn pde_residual(u: &GridFunction, spec: &DirichletSpec) -> Result<f64> {
    spec.domain.check_function(u)?;
    let cells = spec.cells();
    let energy = spec.energy(&cells, &SolverOptions::default());
    Ok(sup_residual(spec, &energy, u.values()))
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    /// `u_f <= u_g + tol` at every node.
    pub holds: bool,
    /// `max(u_f - u_g)` over all nodes.
    pub max_excess: f64,
    pub tol: f64,
    pub lower: SolutionReport,
    pub upper: SolutionReport,
}

fn solve_pair(
    spec: &DirichletSpec,
    f: &GridFunction,
    g: &GridFunction,
    opts: &SolverOptions,
) -> Result<(SolutionReport, SolutionReport)> {
    let sf = spec.with_boundary(f.clone())?;
    let sg = spec.with_boundary(g.clone())?;
    let (a, b) = opts.execution.join(
        || solve_dirichlet(&sf, &Init::Zero, opts),
        || solve_dirichlet(&sg, &Init::Zero, opts),
    );
    Ok((a?, b?))
}

/// Solves with boundary data `f <= g` and checks the solutions are ordered.
pub fn comparison_check(
    f: &GridFunction,
    g: &GridFunction,
    spec: &DirichletSpec,
    opts: &SolverOptions,
    tol: f64,
) -> Result<ComparisonReport> {
    let d = &spec.domain;
    d.check_function(f)?;
    d.check_function(g)?;
    if let Some(k) = d
        .boundary_mask()
        .indices()
        .find(|&k| f.values()[k] > g.values()[k])
    {
        return Err(Error::Precondition(format!(
            "boundary data not ordered at {:?}: {} > {}",
            &d.node_point(k)[..d.dim()],
            f.values()[k],
            g.values()[k]
        )));
    }
    let (lower, upper) = solve_pair(spec, f, g, opts)?;
    let max_excess = lower
        .u
        .values()
        .iter()
        .zip(upper.u.values())
        .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
    Ok(ComparisonReport {
        holds: max_excess <= tol,
        max_excess,
        tol,
        lower,
        upper,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarnackReport {
    pub sup: f64,
    pub inf: f64,
    /// `sup <= c1 * (inf + c2)`.
    pub satisfied: bool,
}

/// Extremes of a nonnegative `u` over a set `k` that avoids the boundary.
pub fn harnack_diagnostic(
    u: &GridFunction,
    k: &SetMask,
    domain: &GridDomain,
    c1: f64,
    c2: f64,
) -> Result<HarnackReport> {
    domain.check_function(u)?;
    domain.check_mask(k)?;
    if k.is_empty() {
        return Err(Error::Precondition("Harnack set is empty".into()));
    }
    if k.indices().any(|i| domain.is_boundary(i)) {
        return Err(Error::Precondition("Harnack set touches the boundary".into()));
    }
    let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in k.indices() {
        let v = u.values()[i];
        if v < 0.0 {
            return Err(Error::Precondition(format!(
                "u = {v} < 0 at {:?}",
                &domain.node_point(i)[..domain.dim()]
            )));
        }
        sup = sup.max(v);
        inf = inf.min(v);
    }
    Ok(HarnackReport {
        sup,
        inf,
        satisfied: sup <= c1 * (inf + c2),
    })
}

/// Smallest `c1` with `sup <= c1 (inf + c2)` for every recorded pair, or
/// `None` if no finite value works.
pub fn harnack_envelope(pairs: &[(f64, f64)], c2: f64) -> Option<f64> {
    let mut c1 = 0.0f64;
    for &(sup, inf) in pairs {
        let base = inf + c2;
        if base > 0.0 {
            c1 = c1.max(sup / base);
        } else if sup > 0.0 {
            return None;
        }
    }
    Some(c1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InjectivityReport {
    /// Sup of `|f - g|` over the boundary nodes of the closure.
    pub boundary_gap: f64,
    /// Sup of `|u_f - u_g|` over all nodes.
    pub solution_gap: f64,
    /// The same over interior nodes only.
    pub interior_gap: f64,
    pub solver_tol: f64,
    pub delta: f64,
    /// Boundary data differ by more than `delta` but the solutions agree
    /// within the solver tolerance.
    pub violation: bool,
    pub converged: bool,
}

/// Solves for two boundary data and compares the gaps. The domain is
/// expected to be regular in capacity at its boundary; that is the
/// caller's check.
pub fn injectivity_probe(
    f: &GridFunction,
    g: &GridFunction,
    spec: &DirichletSpec,
    opts: &SolverOptions,
    delta: f64,
) -> Result<InjectivityReport> {
    let d = &spec.domain;
    d.check_function(f)?;
    d.check_function(g)?;
    let boundary_gap = d
        .omega_boundary_mask()
        .indices()
        .fold(0.0f64, |m, k| m.max((f.values()[k] - g.values()[k]).abs()));
    let (uf, ug) = solve_pair(spec, f, g, opts)?;
    let gap = |k: usize| (uf.u.values()[k] - ug.u.values()[k]).abs();
    let solution_gap = (0..d.node_count())
        .filter(|&k| !d.is_excluded(k))
        .map(gap)
        .fold(0.0, f64::max);
    let interior_gap = d.interior_mask().indices().map(gap).fold(0.0, f64::max);
    Ok(InjectivityReport {
        boundary_gap,
        solution_gap,
        interior_gap,
        solver_tol: opts.tol,
        delta,
        violation: boundary_gap > delta && solution_gap <= opts.tol,
        converged: uf.converged && ug.converged,
    })
}
