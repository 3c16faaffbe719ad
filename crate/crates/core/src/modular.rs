//! Lebesgue and Sobolev modulars, Luxemburg and Sobolev norms, and the
//! Hölder pairing check.

use serde::Serialize;

use crate::cells::CellSet;
use crate::domain::{GridDomain, GridFunction};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::parallel::ordered_sum;

/// Default bisection tolerance for norms.
pub const DEFAULT_NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormResult {
    pub value: f64,
    pub bisection_iterations: usize,
    pub bracket: (f64, f64),
    pub tolerance: f64,
}

fn cells_for(u: &GridFunction, p: &ExponentField, domain: &GridDomain) -> Result<CellSet> {
    domain.check_function(u)?;
    Ok(CellSet::new(domain, p, true))
}

/// `sum_cells |v_c|^{p_c} * vol`, left to right.
pub(crate) fn cell_modular(values: &[f64], ps: &[f64], vol: f64, scale: f64) -> f64 {
    ordered_sum(
        values
            .iter()
            .zip(ps)
            .map(|(v, p)| (v * scale).abs().powf(*p) * vol),
    )
}

pub fn lebesgue_modular(u: &GridFunction, p: &ExponentField, domain: &GridDomain) -> Result<f64> {
    let cs = cells_for(u, p, domain)?;
    Ok(cell_modular(
        &cs.values(u.values()),
        &cs.exponents(),
        cs.volume,
        1.0,
    ))
}

/// `rho_{1,p}(u)`: the Lebesgue modular of `u` plus that of `|grad u|`.
pub fn sobolev_modular(u: &GridFunction, p: &ExponentField, domain: &GridDomain) -> Result<f64> {
    let cs = cells_for(u, p, domain)?;
    Ok(sobolev_modular_on(&cs, u.values()))
}

pub(crate) fn sobolev_modular_on(cs: &CellSet, u: &[f64]) -> f64 {
    let ps = cs.exponents();
    cell_modular(&cs.values(u), &ps, cs.volume, 1.0)
        + cell_modular(&cs.gradient_magnitudes(u), &ps, cs.volume, 1.0)
}

/// Luxemburg norm of a cell field by bisection on `lambda`.
pub(crate) fn luxemburg_cells(values: &[f64], ps: &[f64], vol: f64, tol: f64) -> Result<NormResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { point: vec![] });
    }
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok(NormResult {
            value: 0.0,
            bisection_iterations: 0,
            bracket: (0.0, 0.0),
            tolerance: tol,
        });
    }
    let rho = |lambda: f64| cell_modular(values, ps, vol, 1.0 / lambda);
    let total_vol = vol * values.len() as f64;
    let mut lo = f64::EPSILON;
    let mut hi = 1.0 + max_abs * (total_vol + 1.0);
    while rho(hi) > 1.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut iterations = 0;
    while hi - lo > tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if rho(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(NormResult {
        value: hi,
        bisection_iterations: iterations,
        bracket: (lo, hi),
        tolerance: tol,
    })
}

/// Smallest `lambda` with `lebesgue_modular(u / lambda) <= 1`, up to `tol`
/// relative to `max(1, lambda)`. The returned value is the upper end of the
/// final bracket, so the modular at it never exceeds 1.
pub fn luxemburg_norm(
    u: &GridFunction,
    p: &ExponentField,
    domain: &GridDomain,
    tol: f64,
) -> Result<NormResult> {
    let cs = cells_for(u, p, domain)?;
    luxemburg_cells(&cs.values(u.values()), &cs.exponents(), cs.volume, tol)
}

/// Norm of the cell gradient magnitude field.
pub fn gradient_norm(
    u: &GridFunction,
    p: &ExponentField,
    domain: &GridDomain,
    tol: f64,
) -> Result<NormResult> {
    let cs = cells_for(u, p, domain)?;
    luxemburg_cells(
        &cs.gradient_magnitudes(u.values()),
        &cs.exponents(),
        cs.volume,
        tol,
    )
}

/// `||u||_{L^p} + ||grad u||_{L^p}`.
pub fn sobolev_norm(u: &GridFunction, p: &ExponentField, domain: &GridDomain, tol: f64) -> Result<f64> {
    Ok(luxemburg_norm(u, p, domain, tol)?.value + gradient_norm(u, p, domain, tol)?.value)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `int |uv| <= 2 ||u||_{p} ||v||_{p'}`, evaluated with the cell rule.
pub fn holder_check(
    u: &GridFunction,
    v: &GridFunction,
    p: &ExponentField,
    domain: &GridDomain,
    tol: f64,
) -> Result<HolderCheck> {
    domain.check_function(v)?;
    let cs = cells_for(u, p, domain)?;
    let uc = cs.values(u.values());
    let vc = cs.values(v.values());
    let lhs = ordered_sum(uc.iter().zip(&vc).map(|(a, b)| (a * b).abs() * cs.volume));
    let q = p.conjugate();
    let qs: Vec<f64> = cs.cells.iter().map(|c| q.eval(c.center)).collect();
    let nu = luxemburg_cells(&uc, &cs.exponents(), cs.volume, tol)?.value;
    let nv = luxemburg_cells(&vc, &qs, cs.volume, tol)?.value;
    let rhs = 2.0 * nu * nv;
    Ok(HolderCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BoxBounds};
    use crate::exponent::{parse_exponent_spec, Piece};
    use proptest::prelude::*;

    fn unit(n: usize) -> GridDomain {
        build_grid(BoxBounds::interval(0.0, 1.0), &[n]).unwrap()
    }

    fn two_level(d: &GridDomain) -> ExponentField {
        ExponentField::piecewise(
            vec![Piece {
                lower: vec![0.0],
                upper: vec![0.5],
                value: 2.0,
            }],
            4.0,
            d,
        )
        .unwrap()
    }

    #[test]
    fn lebesgue_modular_examples() {
        let d = unit(33);
        let p = parse_exponent_spec("2 + x", &d).unwrap();
        assert_eq!(lebesgue_modular(&GridFunction::zeros(&d), &p, &d).unwrap(), 0.0);
        let one = GridFunction::constant(&d, 1.0).unwrap();
        assert!((lebesgue_modular(&one, &p, &d).unwrap() - 1.0).abs() < 1e-14);

        let d3 = unit(3);
        let two = GridFunction::constant(&d3, 2.0).unwrap();
        let m = lebesgue_modular(&two, &two_level(&d3), &d3).unwrap();
        assert!((m - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sobolev_modular_of_identity_is_second_order() {
        let p_of = |d: &GridDomain| ExponentField::constant(2.0, d).unwrap();
        let err = |n: usize| {
            let d = unit(n);
            let u = GridFunction::from_fn(&d, |x| x[0]).unwrap();
            (sobolev_modular(&u, &p_of(&d), &d).unwrap() - (1.0 / 3.0 + 1.0)).abs()
        };
        let (e1, e2) = (err(33), err(65));
        // midpoint-of-average rule on x^2 has error h^2 / 12
        assert!((e1 - 1.0 / (12.0 * 32.0 * 32.0)).abs() < 1e-12);
        assert!((e1 / e2 - 4.0).abs() < 1e-6);
        let d = unit(9);
        let c = GridFunction::constant(&d, 3.0).unwrap();
        let p = p_of(&d);
        assert_eq!(
            sobolev_modular(&c, &p, &d).unwrap(),
            lebesgue_modular(&c, &p, &d).unwrap()
        );
    }

    #[test]
    fn luxemburg_examples() {
        let d = unit(33);
        let p = ExponentField::constant(2.0, &d).unwrap();
        let z = luxemburg_norm(&GridFunction::zeros(&d), &p, &d, 1e-10).unwrap();
        assert_eq!(z.value, 0.0);
        let one = GridFunction::constant(&d, 1.0).unwrap();
        assert!((luxemburg_norm(&one, &p, &d, 1e-10).unwrap().value - 1.0).abs() < 1e-9);

        // 0.5 t + 0.5 t^2 = 1 with t = (2 / lambda)^2 gives t = 1, lambda = 2
        let d3 = unit(3);
        let two = GridFunction::constant(&d3, 2.0).unwrap();
        let n = luxemburg_norm(&two, &two_level(&d3), &d3, 1e-10).unwrap();
        assert!((n.value - 2.0).abs() < 1e-9);
        assert!(n.bracket.0 <= n.value && n.value <= n.bracket.1);
        assert!(n.bracket.1 - n.bracket.0 <= 1e-10 * n.value.max(1.0));
        assert!(luxemburg_norm(&two, &two_level(&d3), &d3, 0.0).is_err());
    }

    #[test]
    fn sobolev_norm_of_identity() {
        let d = unit(129);
        let p = ExponentField::constant(2.0, &d).unwrap();
        let u = GridFunction::from_fn(&d, |x| x[0]).unwrap();
        let n = sobolev_norm(&u, &p, &d, 1e-12).unwrap();
        assert!((n - ((1.0f64 / 3.0).sqrt() + 1.0)).abs() < 1e-5);
        assert_eq!(
            sobolev_norm(&GridFunction::zeros(&d), &p, &d, 1e-10).unwrap(),
            0.0
        );
    }

    #[test]
    fn holder_examples() {
        let d = unit(33);
        let p = ExponentField::constant(2.0, &d).unwrap();
        let u = GridFunction::from_fn(&d, |x| (3.0 * x[0]).sin() + 0.2).unwrap();
        let z = GridFunction::zeros(&d);
        let r = holder_check(&u, &z, &p, &d, 1e-10).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);
        let r = holder_check(&u, &u, &p, &d, 1e-10).unwrap();
        assert!((r.rhs - 2.0 * r.lhs).abs() < 1e-8);
        assert!(r.holds);
    }

    proptest! {
        #[test]
        fn modular_is_monotone(vals in proptest::collection::vec(-3.0f64..3.0, 17), shrink in proptest::collection::vec(0.0f64..1.0, 17)) {
            let d = unit(17);
            let p = parse_exponent_spec("1.5 + x", &d).unwrap();
            let v = GridFunction::new(&d, vals.clone()).unwrap();
            let u = GridFunction::new(&d, vals.iter().zip(&shrink).map(|(a, s)| a * s).collect()).unwrap();
            prop_assert!(lebesgue_modular(&u, &p, &d).unwrap() <= lebesgue_modular(&v, &p, &d).unwrap());
        }

        #[test]
        fn norm_is_homogeneous(vals in proptest::collection::vec(-3.0f64..3.0, 17), c in -20.0f64..20.0) {
            let d = unit(17);
            let p = parse_exponent_spec("1.5 + x", &d).unwrap();
            let tol = 1e-10;
            let u = GridFunction::new(&d, vals).unwrap();
            let a = luxemburg_norm(&u, &p, &d, tol).unwrap().value;
            let b = luxemburg_norm(&u.scaled(c).unwrap(), &p, &d, tol).unwrap().value;
            prop_assert!((b - c.abs() * a).abs() <= 2.0 * tol * (1.0 + b));
        }
    }
}
