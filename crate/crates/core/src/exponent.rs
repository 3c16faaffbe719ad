//! Variable exponents `p(x)` with cached grid bounds, conjugates and the
//! log-Hölder modulus scan.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, Point};
use crate::error::{Error, Result};
use crate::expr::{self, Bindings, Expr, Var};
use crate::parallel::Execution;

/// Closed rectangle (interval in 1D) with a constant exponent value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub value: f64,
}

impl Piece {
    fn contains(&self, x: Point) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .enumerate()
            .all(|(a, (lo, hi))| x[a] >= *lo && x[a] <= *hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentKind {
    Constant,
    PiecewiseRectangular,
    Expression,
}

#[derive(Debug)]
enum Source {
    Constant(f64),
    /// First matching piece wins; `default` elsewhere.
    Piecewise {
        pieces: Vec<Piece>,
        default: f64,
    },
    Expression(Expr),
    Conjugate(Arc<Source>),
}

impl Source {
    fn eval(&self, x: Point) -> f64 {
        match self {
            Source::Constant(p) => *p,
            Source::Piecewise { pieces, default } => pieces
                .iter()
                .find(|pc| pc.contains(x))
                .map_or(*default, |pc| pc.value),
            Source::Expression(e) => e.eval(&Bindings::at(&x)),
            Source::Conjugate(inner) => {
                let p = inner.eval(x);
                p / (p - 1.0)
            }
        }
    }

    fn kind(&self) -> ExponentKind {
        match self {
            Source::Constant(_) => ExponentKind::Constant,
            Source::Piecewise { .. } => ExponentKind::PiecewiseRectangular,
            Source::Expression(_) => ExponentKind::Expression,
            Source::Conjugate(inner) => inner.kind(),
        }
    }
}

/// Grid on which the exponent is extended by nearest-node values.
#[derive(Clone, Debug)]
struct Extension {
    lower: Point,
    spacing: Point,
    last: [usize; 2],
    dim: usize,
}

impl Extension {
    fn of(domain: &GridDomain) -> Self {
        let dim = domain.dim();
        let b = domain.bounds();
        Extension {
            lower: [b.lower[0], if dim > 1 { b.lower[1] } else { 0.0 }],
            spacing: [
                domain.spacing()[0],
                if dim > 1 { domain.spacing()[1] } else { 1.0 },
            ],
            last: [domain.nx() - 1, domain.ny() - 1],
            dim,
        }
    }

    /// Points outside the box are mapped to the nearest grid node.
    fn map(&self, x: Point) -> Point {
        let mut out = x;
        for a in 0..self.dim {
            let hi = self.lower[a] + self.last[a] as f64 * self.spacing[a];
            if x[a] < self.lower[a] || x[a] > hi {
                let t = ((x[a] - self.lower[a]) / self.spacing[a])
                    .round()
                    .clamp(0.0, self.last[a] as f64);
                out[a] = self.lower[a] + t * self.spacing[a];
            }
        }
        out
    }
}

/// An immutable exponent field attached to a grid.
#[derive(Clone, Debug)]
pub struct ExponentField {
    source: Arc<Source>,
    extension: Extension,
    p_minus: f64,
    p_plus: f64,
}

impl ExponentField {
    fn build(source: Source, domain: &GridDomain) -> Result<Self> {
        let mut f = ExponentField {
            source: Arc::new(source),
            extension: Extension::of(domain),
            p_minus: f64::NAN,
            p_plus: f64::NAN,
        };
        f.compute_bounds(domain)?;
        Ok(f)
    }

    pub fn constant(p: f64, domain: &GridDomain) -> Result<Self> {
        Self::build(Source::Constant(p), domain)
    }

    pub fn piecewise(pieces: Vec<Piece>, default: f64, domain: &GridDomain) -> Result<Self> {
        for pc in &pieces {
            if pc.lower.len() != domain.dim() || pc.upper.len() != domain.dim() {
                return Err(Error::InvalidArgument(
                    "piece dimension does not match the domain".into(),
                ));
            }
        }
        Self::build(Source::Piecewise { pieces, default }, domain)
    }

    pub fn from_expr(e: Expr, domain: &GridDomain) -> Result<Self> {
        match e.as_constant() {
            Some(c) => Self::constant(c, domain),
            None => Self::build(Source::Expression(e), domain),
        }
    }

    /// Samples nodes and cell centers; the modular evaluates at cell centers.
    fn compute_bounds(&mut self, domain: &GridDomain) -> Result<()> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let nodes = (0..domain.node_count()).map(|k| domain.node_point(k));
        let centers = (0..domain.cell_count()).map(|c| domain.cell_center(c));
        for x in nodes.chain(centers) {
            let p = self.eval(x);
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    point: x[..domain.dim()].to_vec(),
                });
            }
            if p <= 1.0 {
                return Err(Error::ExponentBounds {
                    point: x[..domain.dim()].to_vec(),
                    value: p,
                });
            }
            lo = lo.min(p);
            hi = hi.max(p);
        }
        self.p_minus = lo;
        self.p_plus = hi;
        Ok(())
    }

    /// The same field with bounds recomputed on another grid. Values outside
    /// the original box keep the nearest-node extension.
    pub fn attach(&self, domain: &GridDomain) -> Result<Self> {
        let mut f = ExponentField {
            source: Arc::clone(&self.source),
            extension: self.extension.clone(),
            p_minus: f64::NAN,
            p_plus: f64::NAN,
        };
        f.compute_bounds(domain)?;
        Ok(f)
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.source.eval(self.extension.map(x))
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn kind(&self) -> ExponentKind {
        self.source.kind()
    }

    pub fn constant_value(&self) -> Option<f64> {
        (self.p_minus == self.p_plus).then_some(self.p_minus)
    }

    /// The dual exponent `p' = p / (p - 1)`.
    pub fn conjugate(&self) -> ExponentField {
        let dual = |p: f64| p / (p - 1.0);
        let source = match &*self.source {
            Source::Constant(p) => Source::Constant(dual(*p)),
            _ => Source::Conjugate(Arc::clone(&self.source)),
        };
        ExponentField {
            source: Arc::new(source),
            extension: self.extension.clone(),
            p_minus: dual(self.p_plus),
            p_plus: dual(self.p_minus),
        }
    }
}

/// Parses an exponent expression in `x` (and `y` in 2D) and attaches it to
/// `domain`. Fails on parse errors, non-finite samples or samples `<= 1`.
pub fn parse_exponent_spec(text: &str, domain: &GridDomain) -> Result<ExponentField> {
    let vars: &[Var] = if domain.dim() == 2 {
        &[Var::X, Var::Y]
    } else {
        &[Var::X]
    };
    let e = expr::parse(text, vars)?;
    ExponentField::from_expr(e, domain)
}

pub fn conjugate_exponent(field: &ExponentField) -> ExponentField {
    field.conjugate()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogHolderReport {
    /// Smallest `C` with `|p(x) - p(y)| <= C / (-log|x - y|)` over the scanned pairs.
    pub constant_estimate: f64,
    pub worst_pair: (Point, Point),
    pub satisfied_at_tolerance: bool,
    pub threshold: f64,
    pub pairs_examined: usize,
    pub exhaustive: bool,
}

/// Node count up to which every pair is scanned.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 4096;

/// Scans node pairs with `0 < |x - y| < 1/2`. Above
/// [`EXHAUSTIVE_PAIR_LIMIT`] nodes the scan covers a strided sub-lattice
/// exhaustively plus every pair of Chebyshev neighbours.
pub fn log_holder_modulus(
    field: &ExponentField,
    domain: &GridDomain,
    threshold: f64,
    exec: Execution,
) -> Result<LogHolderReport> {
    let n = domain.node_count();
    if n < 2 {
        return Err(Error::Precondition("need at least two nodes".into()));
    }
    let pts: Vec<Point> = (0..n).map(|k| domain.node_point(k)).collect();
    let vals: Vec<f64> = pts.iter().map(|x| field.eval(*x)).collect();
    let exhaustive = n <= EXHAUSTIVE_PAIR_LIMIT;

    let sample: Vec<usize> = if exhaustive {
        (0..n).collect()
    } else {
        let stride =
            ((n as f64 / EXHAUSTIVE_PAIR_LIMIT as f64).powf(1.0 / domain.dim() as f64)).ceil() as usize;
        (0..n)
            .filter(|&k| {
                let (i, j) = domain.node_ij(k);
                i % stride == 0 && j % stride == 0
            })
            .collect()
    };

    let score = |a: usize, b: usize| -> Option<f64> {
        let d = ((pts[a][0] - pts[b][0]).powi(2) + (pts[a][1] - pts[b][1]).powi(2)).sqrt();
        (d > 0.0 && d < 0.5).then(|| (vals[a] - vals[b]).abs() * -d.ln())
    };

    // per-row best (value, partner, count); rows are reduced in index order
    let rows = exec.map_range(sample.len(), |ia| {
        let a = sample[ia];
        let mut best: Option<(f64, usize)> = None;
        let mut count = 0usize;
        for &b in &sample[ia + 1..] {
            if let Some(c) = score(a, b) {
                count += 1;
                if best.is_none_or(|(v, _)| c > v) {
                    best = Some((c, b));
                }
            }
        }
        if !exhaustive {
            for b in domain.neighbors8(a).collect::<Vec<_>>() {
                if let Some(c) = score(a, b) {
                    count += 1;
                    if best.is_none_or(|(v, _)| c > v) {
                        best = Some((c, b));
                    }
                }
            }
        }
        (best, count)
    });
    let mut extra = Vec::new();
    if !exhaustive {
        // neighbour pairs of nodes outside the sub-lattice
        let in_sample: Vec<bool> = {
            let mut m = vec![false; n];
            sample.iter().for_each(|&k| m[k] = true);
            m
        };
        extra = exec.map_range(n, |a| {
            if in_sample[a] {
                return (None, 0);
            }
            let mut best: Option<(f64, usize)> = None;
            let mut count = 0;
            for b in domain.neighbors8(a) {
                if b > a || in_sample[b] {
                    if let Some(c) = score(a, b) {
                        count += 1;
                        if best.is_none_or(|(v, _)| c > v) {
                            best = Some((c, b));
                        }
                    }
                }
            }
            (best, count)
        });
    }

    let mut best = (0.0f64, (sample[0], sample.get(1).copied().unwrap_or(1)));
    let mut found = false;
    let mut pairs = 0usize;
    let firsts = sample.iter().copied().chain(0..extra.len());
    for (a, (row_best, count)) in firsts.zip(rows.into_iter().chain(extra)) {
        pairs += count;
        if let Some((c, b)) = row_best {
            if !found || c > best.0 {
                best = (c, (a, b));
                found = true;
            }
        }
    }
    let (a, b) = best.1;
    Ok(LogHolderReport {
        constant_estimate: best.0,
        worst_pair: (pts[a], pts[b.min(n - 1)]),
        satisfied_at_tolerance: best.0 <= threshold,
        threshold,
        pairs_examined: pairs,
        exhaustive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BoxBounds};

    fn unit(n: usize) -> GridDomain {
        build_grid(BoxBounds::interval(0.0, 1.0), &[n]).unwrap()
    }

    #[test]
    fn constant_and_linear_bounds() {
        let d = unit(33);
        let c = parse_exponent_spec("2", &d).unwrap();
        assert_eq!((c.p_minus(), c.p_plus()), (2.0, 2.0));
        assert_eq!(c.kind(), ExponentKind::Constant);
        let l = parse_exponent_spec("2 + x", &d).unwrap();
        assert_eq!((l.p_minus(), l.p_plus()), (2.0, 3.0));
        assert_eq!(l.kind(), ExponentKind::Expression);
    }

    #[test]
    fn rejects_exponents_at_most_one() {
        let d = unit(33);
        assert!(matches!(
            parse_exponent_spec("1 - x", &d),
            Err(Error::ExponentBounds { .. })
        ));
        assert!(matches!(
            parse_exponent_spec("1 + 1 / (x - 0.5)", &d),
            Err(Error::NonFinite { .. }) | Err(Error::ExponentBounds { .. })
        ));
        assert!(matches!(
            parse_exponent_spec("2 + log(x)", &d),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            parse_exponent_spec("2 + ", &d),
            Err(Error::Parse { .. })
        ));
        assert!(parse_exponent_spec("2 + y", &d).is_err());
    }

    #[test]
    fn conjugates() {
        let d = unit(5);
        let two = ExponentField::constant(2.0, &d).unwrap().conjugate();
        assert_eq!(two.constant_value(), Some(2.0));
        let four = ExponentField::constant(4.0, &d).unwrap().conjugate();
        assert!((four.eval([0.3, 0.0]) - 4.0 / 3.0).abs() < 1e-15);
        let lin = parse_exponent_spec("2 + x", &d).unwrap().conjugate();
        assert_eq!(lin.eval([0.0, 0.0]), 2.0);
        assert!((lin.eval([1.0, 0.0]) - 1.5).abs() < 1e-15);
        assert!((lin.p_minus() - 1.5).abs() < 1e-15 && lin.p_plus() == 2.0);
    }

    #[test]
    fn conjugate_is_an_involution() {
        let d = build_grid(BoxBounds::rect([0.0, 0.0], [1.0, 1.0]), &[17, 17]).unwrap();
        let p = parse_exponent_spec("1.3 + x * x + 2 * sin(3 * y) ^ 2", &d).unwrap();
        let pp = p.conjugate().conjugate();
        for k in 0..d.node_count() {
            let x = d.node_point(k);
            assert!((p.eval(x) - pp.eval(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn bounds_hold_at_every_node() {
        let d = build_grid(BoxBounds::rect([-1.0, 0.0], [1.0, 2.0]), &[21, 13]).unwrap();
        let p = parse_exponent_spec("2 + 0.5 * sin(4 * x * y) + abs(x)", &d).unwrap();
        for k in 0..d.node_count() {
            let v = p.eval(d.node_point(k));
            assert!(p.p_minus() <= v && v <= p.p_plus());
        }
    }

    #[test]
    fn piecewise_and_extension() {
        let d = unit(3);
        let p = ExponentField::piecewise(
            vec![Piece {
                lower: vec![0.0],
                upper: vec![0.5],
                value: 2.0,
            }],
            4.0,
            &d,
        )
        .unwrap();
        assert_eq!(p.eval([0.25, 0.0]), 2.0);
        assert_eq!(p.eval([0.75, 0.0]), 4.0);
        assert_eq!(p.kind(), ExponentKind::PiecewiseRectangular);
        let lin = parse_exponent_spec("2 + x", &d).unwrap();
        assert_eq!(lin.eval([1.7, 0.0]), 3.0);
        assert_eq!(lin.eval([-0.3, 0.0]), 2.0);
    }

    #[test]
    fn log_holder_constant_is_zero() {
        let d = unit(33);
        let p = ExponentField::constant(2.5, &d).unwrap();
        let r = log_holder_modulus(&p, &d, 1.0, Execution::Sequential).unwrap();
        assert_eq!(r.constant_estimate, 0.0);
        assert!(r.satisfied_at_tolerance);
        assert!(r.worst_pair.0 != r.worst_pair.1);
    }

    #[test]
    fn log_holder_linear_matches_enumeration() {
        let d = unit(65);
        let p = parse_exponent_spec("2 + x", &d).unwrap();
        // oracle: max over k of t * (-ln t), t = k / 64 < 1/2
        let oracle = (1..32)
            .map(|k| k as f64 / 64.0)
            .map(|t| t * -t.ln())
            .fold(0.0f64, f64::max);
        let r = log_holder_modulus(&p, &d, 10.0, Execution::Parallel).unwrap();
        assert!(
            (r.constant_estimate - oracle).abs() < 1e-12,
            "{} vs {oracle}",
            r.constant_estimate
        );
        assert!(r.exhaustive);
        let sep = (r.worst_pair.0[0] - r.worst_pair.1[0]).abs();
        assert!((sep - 24.0 / 64.0).abs() < 1e-12 || (sep - 23.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn log_holder_jump_grows_with_resolution() {
        let mut prev = 0.0;
        for n in [33, 65, 129, 257] {
            let d = unit(n);
            let p = parse_exponent_spec("2 + step(x - 0.5)", &d).unwrap();
            let r = log_holder_modulus(&p, &d, 10.0, Execution::Sequential).unwrap();
            let h = 1.0 / (n - 1) as f64;
            // closest straddling pair is one step apart
            assert!((r.constant_estimate - (-h.ln())).abs() < 1e-12);
            assert!(r.constant_estimate > prev);
            prev = r.constant_estimate;
        }
        let d = unit(129);
        let p = parse_exponent_spec("2 + step(x - 0.5)", &d).unwrap();
        let r = log_holder_modulus(&p, &d, 4.0, Execution::Sequential).unwrap();
        assert!(!r.satisfied_at_tolerance);
    }

    #[test]
    fn log_holder_sampled_scan_sees_neighbour_jumps() {
        let d = build_grid(BoxBounds::rect([0.0, 0.0], [1.0, 1.0]), &[97, 97]).unwrap();
        let p = parse_exponent_spec("2 + step(x - 0.5)", &d).unwrap();
        let r = log_holder_modulus(&p, &d, 10.0, Execution::Parallel).unwrap();
        assert!(!r.exhaustive);
        assert!((r.constant_estimate - (96.0f64).ln()).abs() < 1e-9);
    }
}
