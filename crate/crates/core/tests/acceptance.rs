//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (harness = false). Pass criterion numbers to run a
//! subset: `cargo test --test acceptance -- 5 11`.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varcap::capacity::{boundary_capacity_identity, sobolev_capacity, CapacityOptions};
use varcap::cells::CellSet;
use varcap::config::Command;
use varcap::dirichlet::{
    comparison_check, injectivity_probe, parse_perturbation, solve_dirichlet, DirichletSpec, Growth, Init,
};
use varcap::domain::{build_grid, BoxBounds, GridDomain, GridFunction, Region, SetMask};
use varcap::driver::run_config;
use varcap::energy::{Energy, GradWeight, LowerOrder, PowerMass};
use varcap::exponent::{parse_exponent_spec, ExponentField};
use varcap::finetopo::{
    regular_in_capacity_check, CapacityVariant, RegularityOptions, Thinness, ThinnessContext, ThinnessOptions,
};
use varcap::modular::{holder_check, lebesgue_modular, luxemburg_norm};
use varcap::parallel::Execution;
use varcap::solver::SolverOptions;

type Check = Result<(bool, String), String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn unit_interval(n: usize) -> GridDomain {
    build_grid(BoxBounds::interval(0.0, 1.0), &[n]).unwrap()
}

fn unit_square(n: usize) -> GridDomain {
    build_grid(BoxBounds::rect([0.0, 0.0], [1.0, 1.0]), &[n, n]).unwrap()
}

fn random_function(d: &GridDomain, rng: &mut ChaCha8Rng) -> GridFunction {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    let vals = (0..d.node_count())
        .map(|_| scale * rng.gen_range(-1.0..1.0))
        .collect();
    GridFunction::new(d, vals).unwrap()
}

/// Smooth random boundary data: a few low modes plus a constant.
fn random_smooth(d: &GridDomain, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
    let c: Vec<f64> = (0..7).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
    GridFunction::from_fn(d, |x| {
        c[0] + c[1] * x[0]
            + c[2] * x[1]
            + c[3] * (PI * x[0]).sin() * (PI * x[1]).cos()
            + c[4] * (2.0 * PI * x[1]).sin()
            + c[5] * x[0] * x[1]
            + c[6] * (3.0 * x[0] - x[1]).cos()
    })
    .unwrap()
}

/// Nonnegative random bump, zero on part of the boundary.
fn random_bump(d: &GridDomain, rng: &mut ChaCha8Rng) -> GridFunction {
    let (cx, cy) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
    let (w, a) = (rng.gen_range(0.1..0.5), rng.gen_range(0.0..0.5));
    GridFunction::from_fn(d, |x| {
        let r2 = ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (w * w);
        a * (1.0 - r2).max(0.0)
    })
    .unwrap()
}

fn canonical_spec(d: &GridDomain, p: &ExponentField, boundary: GridFunction) -> DirichletSpec {
    let b = parse_perturbation("abs(z)^(p-2)*z", &Growth::default(), p, d).unwrap();
    DirichletSpec::new(d.clone(), p, b, boundary).unwrap()
}

fn add(a: &GridFunction, b: &GridFunction, d: &GridDomain) -> GridFunction {
    GridFunction::new(d, a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect()).unwrap()
}

/// Observed orders `log2(e_k / e_{k+1})` for errors at halved spacings.
fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn c1_luxemburg_reduction() -> Check {
    let d = unit_interval(65);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let t = Instant::now();
    for p0 in [1.5, 2.0, 3.0] {
        let p = ExponentField::constant(p0, &d).map_err(err)?;
        for _ in 0..100 {
            let u = random_function(&d, &mut rng);
            let rho = lebesgue_modular(&u, &p, &d).map_err(err)?;
            let norm = luxemburg_norm(&u, &p, &d, 1e-12).map_err(err)?.value;
            let want = rho.powf(1.0 / p0);
            worst = worst.max((norm - want).abs() / want);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-8 && secs < 5.0,
        format!("max rel err {worst:.2e} (<= 1e-8), {secs:.2} s (< 5 s)"),
    ))
}

fn c2_unit_ball_homogeneity() -> Check {
    let d = unit_interval(65);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut ball_bad, mut worst_h): (usize, f64) = (0, 0.0);
    for p0 in [1.5, 2.0, 3.0] {
        let p = ExponentField::constant(p0, &d).map_err(err)?;
        for _ in 0..100 {
            let u = random_function(&d, &mut rng);
            let n = luxemburg_norm(&u, &p, &d, 1e-12).map_err(err)?.value;
            // just inside and just outside the unit ball
            for (f, inside) in [(1.0 + 1e-7, true), (1.0 - 1e-7, false)] {
                let v = u.scaled(1.0 / (n * f)).map_err(err)?;
                let rho = lebesgue_modular(&v, &p, &d).map_err(err)?;
                if (rho <= 1.0) != inside {
                    ball_bad += 1;
                }
            }
            let c: f64 = rng.gen_range(-10.0..10.0);
            let nc = luxemburg_norm(&u.scaled(c).map_err(err)?, &p, &d, 1e-12)
                .map_err(err)?
                .value;
            worst_h = worst_h.max((nc - c.abs() * n).abs() / (c.abs() * n));
        }
    }
    Ok((
        ball_bad == 0 && worst_h <= 1e-7,
        format!("unit-ball mismatches {ball_bad}, homogeneity max rel err {worst_h:.2e} (<= 1e-7)"),
    ))
}

fn c3_holder() -> Check {
    let d = unit_interval(65);
    let p = parse_exponent_spec("2 + x", &d).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = Instant::now();
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..200 {
        let u = random_function(&d, &mut rng);
        let v = random_function(&d, &mut rng);
        let h = holder_check(&u, &v, &p, &d, 1e-12).map_err(err)?;
        if !h.holds {
            violations += 1;
        }
        tightest = tightest.min(h.rhs / h.lhs);
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        violations == 0 && secs < 10.0,
        format!("violations {violations}/200, min rhs/lhs {tightest:.3}, {secs:.2} s (< 10 s)"),
    ))
}

fn random_region(rng: &mut ChaCha8Rng) -> Region {
    let c = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
    if rng.gen_bool(0.5) {
        Region::Ball {
            center: c.to_vec(),
            radius: rng.gen_range(0.03..0.15),
        }
    } else {
        let (w, h) = (rng.gen_range(0.02..0.15), rng.gen_range(0.02..0.15));
        Region::Rect {
            lower: vec![c[0] - w, c[1] - h],
            upper: vec![c[0] + w, c[1] + h],
        }
    }
}

fn c4_capacity_axioms() -> Check {
    let d = unit_square(65);
    let p = parse_exponent_spec("1.6 + 0.8*x", &d).map_err(err)?;
    let opts = CapacityOptions::default();
    let t = Instant::now();
    let empty = sobolev_capacity(&d.empty_mask(), &p, &d, &opts)
        .map_err(err)?
        .value;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs: Vec<(SetMask, SetMask)> = (0..50)
        .map(|_| {
            let a = random_region(&mut rng).mask(&d).unwrap();
            let b = random_region(&mut rng).mask(&d).unwrap();
            (a, b)
        })
        .collect();
    let caps: Vec<Result<[f64; 4], String>> = Execution::default().map_tasks(&pairs, |(a, b)| {
        let u = a.union(b).map_err(err)?;
        let ca = sobolev_capacity(a, &p, &d, &opts).map_err(err)?;
        let cb = sobolev_capacity(b, &p, &d, &opts).map_err(err)?;
        let cu = sobolev_capacity(&u, &p, &d, &opts).map_err(err)?;
        let ok = ca.converged && cb.converged && cu.converged;
        Ok([ca.value, cb.value, cu.value, if ok { 1.0 } else { 0.0 }])
    });
    let tol = 3.0 * opts.solver.tol;
    let (mut mono_bad, mut sub_bad, mut unconverged) = (0, 0, 0);
    let (mut mono_margin, mut sub_margin) = (f64::INFINITY, f64::INFINITY);
    for c in caps {
        let [a, b, u, ok] = c?;
        if ok == 0.0 {
            unconverged += 1;
        }
        for s in [a, b] {
            mono_margin = mono_margin.min(u - s);
            if s > u + tol {
                mono_bad += 1;
            }
        }
        sub_margin = sub_margin.min(a + b - u);
        if u > a + b + tol {
            sub_bad += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        empty == 0.0 && mono_bad == 0 && sub_bad == 0 && unconverged == 0 && secs < 600.0,
        format!(
            "C(empty) = {empty}, monotonicity violations {mono_bad}/100 (min margin {mono_margin:.2e}), \
             subadditivity violations {sub_bad}/50 (min margin {sub_margin:.2e}), tol {tol:.0e}, \
             unconverged {unconverged}, {secs:.1} s (< 600 s)"
        ),
    ))
}

fn c5_interval_oracle() -> Check {
    // u = 1 on [0,1], cosh(1 - t)/cosh(1) at distance t outside, natural ends
    let exact = 1.0 + 2.0 * 1f64.tanh();
    let mut errors = Vec::new();
    let mut values = Vec::new();
    for n in [193, 385, 769] {
        let d = build_grid(BoxBounds::interval(-1.0, 2.0), &[n]).map_err(err)?;
        let p = ExponentField::constant(2.0, &d).map_err(err)?;
        let e = Region::Rect {
            lower: vec![0.0],
            upper: vec![1.0],
        }
        .mask(&d)
        .map_err(err)?;
        let c = sobolev_capacity(&e, &p, &d, &CapacityOptions::default()).map_err(err)?;
        if !c.converged {
            return Ok((false, format!("not converged at {n} nodes")));
        }
        values.push(c.value);
        errors.push((c.value - exact).abs() / exact);
    }
    let ord = orders(&errors);
    Ok((
        errors[2] <= 0.01 && ord.iter().all(|o| *o >= 0.9),
        format!(
            "rel err at h = 1/64, 1/128, 1/256: {:.3e} {:.3e} {:.3e} (last <= 1e-2), orders {:.2} {:.2} (>= 0.9)",
            errors[0], errors[1], errors[2], ord[0], ord[1]
        ),
    ))
}

/// `I_0` and `I_1` by their power series (small arguments).
fn bessel_i01(x: f64) -> (f64, f64) {
    let (mut i0, mut i1) = (0.0, 0.0);
    let mut term = 1.0; // (x/2)^{2k} / (k!)^2
    for k in 0..30 {
        let kf = k as f64;
        if k > 0 {
            term *= (x / 2.0).powi(2) / (kf * kf);
        }
        i0 += term;
        i1 += term * (x / 2.0) / (kf + 1.0);
    }
    (i0, i1)
}

fn c6_disk_vs_ring() -> Check {
    let radius = 0.25;
    let mut gaps = Vec::new();
    let mut cap = 0.0;
    for n in [33, 65, 129] {
        let d = unit_square(n);
        let p = ExponentField::constant(2.0, &d).map_err(err)?;
        let disk = d.ball_mask([0.5, 0.5], radius).map_err(err)?;
        let r = boundary_capacity_identity(&disk, &p, &d, &CapacityOptions::default()).map_err(err)?;
        gaps.push(r.relative_gap);
        cap = r.cap_set;
    }
    // With the |u|^2 term the ring minimizer solves -lap u + u = 0 inside,
    // u = I_0(r) / I_0(R), so the continuum gap is pi R^2 - 2 pi R I_1 / I_0.
    let (i0, i1) = bessel_i01(radius);
    let limit = (PI * radius * radius - 2.0 * PI * radius * i1 / i0) / cap;
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok((
        gaps[2] <= 0.05 && shrinking,
        format!(
            "relative gap at h = 1/32, 1/64, 1/128: {:.3e} {:.3e} {:.3e} (last <= 5e-2, decreasing); \
             continuum gap of the full modular {limit:.3e}",
            gaps[0], gaps[1], gaps[2]
        ),
    ))
}

fn c7_dirichlet_exactness() -> Check {
    let opts = SolverOptions::default();
    let mut lin_err: f64 = 0.0;
    for d in [unit_interval(65), unit_square(33)] {
        let p = ExponentField::constant(2.0, &d).map_err(err)?;
        let g = GridFunction::from_fn(&d, |x| 0.3 + x[0] - 2.0 * x[1]).map_err(err)?;
        let b = parse_perturbation("0", &Growth::default(), &p, &d).map_err(err)?;
        let spec = DirichletSpec::new(d.clone(), &p, b, g.clone()).map_err(err)?;
        let s = solve_dirichlet(&spec, &Init::Zero, &opts).map_err(err)?;
        lin_err = lin_err.max(s.u.sup_distance(&g).map_err(err)?);
    }
    let mut errors = Vec::new();
    for n in [17, 33, 65] {
        let d = unit_interval(n);
        let p = ExponentField::constant(2.0, &d).map_err(err)?;
        let g = GridFunction::from_fn(&d, |x| x[0].sinh()).map_err(err)?;
        let b = parse_perturbation("z", &Growth::default(), &p, &d).map_err(err)?;
        let spec = DirichletSpec::new(d.clone(), &p, b, g.clone()).map_err(err)?;
        let s = solve_dirichlet(&spec, &Init::Zero, &opts).map_err(err)?;
        errors.push(s.u.sup_distance(&g).map_err(err)?);
    }
    let ord = orders(&errors);
    Ok((
        lin_err <= 1e-8 && ord.iter().all(|o| *o >= 1.8),
        format!(
            "linear sup err {lin_err:.2e} (<= 1e-8); sinh sup err {:.2e} {:.2e} {:.2e}, orders {:.2} {:.2} (>= 1.8)",
            errors[0], errors[1], errors[2], ord[0], ord[1]
        ),
    ))
}

fn c8_comparison() -> Check {
    let d = unit_square(33);
    let p = parse_exponent_spec("2 + x", &d).map_err(err)?;
    let opts = SolverOptions::default();
    let tol = 10.0 * opts.tol;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = Instant::now();
    let (mut violations, mut unconverged) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let f = random_smooth(&d, &mut rng, 0.5);
        let g = add(&f, &random_bump(&d, &mut rng), &d);
        let spec = canonical_spec(&d, &p, f.clone());
        let r = comparison_check(&f, &g, &spec, &opts, tol).map_err(err)?;
        if !(r.lower.converged && r.upper.converged) {
            unconverged += 1;
        }
        if !r.holds {
            violations += 1;
        }
        worst = worst.max(r.max_excess);
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        violations == 0 && unconverged == 0 && secs < 900.0,
        format!(
            "violations {violations}/50, max excess of u_f over u_g {worst:.2e} (tol {tol:.0e}), \
             unconverged {unconverged}, {secs:.1} s (< 900 s)"
        ),
    ))
}

fn c9_uniqueness() -> Check {
    let d = unit_square(17);
    let p = parse_exponent_spec("2 + x", &d).map_err(err)?;
    let opts = SolverOptions::default();
    let tol = 10.0 * opts.tol;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut bad, mut worst): (usize, f64) = (0, 0.0);
    for trial in 0..20u64 {
        let f = random_smooth(&d, &mut rng, 1.0);
        let spec = canonical_spec(&d, &p, f);
        let a = solve_dirichlet(&spec, &Init::Random { seed: 2 * trial }, &opts).map_err(err)?;
        let b = solve_dirichlet(&spec, &Init::Random { seed: 2 * trial + 1 }, &opts).map_err(err)?;
        let gap = a.u.sup_distance(&b.u).map_err(err)?;
        worst = worst.max(gap);
        if gap > tol || !a.converged || !b.converged {
            bad += 1;
        }
    }
    Ok((
        bad == 0,
        format!("disagreements {bad}/20, max sup gap {worst:.2e} (<= {tol:.0e})"),
    ))
}

fn c10_injectivity() -> Check {
    let d = unit_square(17);
    let p = ExponentField::constant(2.0, &d).map_err(err)?;
    let opts = SolverOptions::default();
    // the square must pass the regularity check at sampled boundary nodes
    let ro = RegularityOptions {
        variant: CapacityVariant::Relative,
        ..RegularityOptions::default()
    };
    let samples = varcap::driver::sample_boundary_nodes(&d, 4);
    for x in &samples {
        let r = regular_in_capacity_check(&d, *x, &p, &[0.25], 1e-8, &ro).map_err(err)?;
        if !r.regular {
            return Ok((false, format!("square not regular at {:?}", r.point)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut violations, mut pairs) = (0, 0);
    let mut smallest = f64::INFINITY;
    while pairs < 50 {
        let f = random_smooth(&d, &mut rng, 1.0);
        let g = add(&f, &random_smooth(&d, &mut rng, 0.2), &d);
        let spec = canonical_spec(&d, &p, f.clone());
        let r = injectivity_probe(&f, &g, &spec, &opts, 0.1).map_err(err)?;
        if r.boundary_gap < 0.1 {
            continue;
        }
        pairs += 1;
        smallest = smallest.min(r.interior_gap);
        if r.violation || r.interior_gap <= r.solver_tol || !r.converged {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!(
            "regular at {} sampled boundary nodes; violations {violations}/50, \
             min interior solution gap {smallest:.2e} (> solver tol {:.0e})",
            samples.len(),
            opts.tol
        ),
    ))
}

fn c11_thinness() -> Check {
    let bx = build_grid(BoxBounds::interval(-1.0, 1.0), &[513]).map_err(err)?;
    let p = ExponentField::constant(2.0, &bx).map_err(err)?;
    let ctx = ThinnessContext::new([0.0, 0.0], &p, &bx, &ThinnessOptions::default()).map_err(err)?;
    let full = ctx.series(&bx.full_mask()).map_err(err)?;
    let empty = ctx.series(&bx.empty_mask()).map_err(err)?;
    // 2^-k for k = 1..8: every point is its own grid node, none is 0
    let pts: Vec<Vec<f64>> = (1..=8).map(|k| vec![0.5f64.powi(k)]).collect();
    let e = Region::Points { points: pts }.mask(&bx).map_err(err)?;
    let seq = ctx.series(&e).map_err(err)?;
    let tail: Vec<String> = seq.ratios().iter().map(|r| format!("{r:.3}")).collect();
    Ok((
        full.classification == Thinness::Thick
            && empty.classification == Thinness::Thin
            && seq.classification == Thinness::Thin,
        format!(
            "full ball {:?} (want Thick), empty {:?} (want Thin), dyadic points {:?} (want Thin; ratios {})",
            full.classification,
            empty.classification,
            seq.classification,
            tail.join(" ")
        ),
    ))
}

fn c12_regularity() -> Check {
    let n = 33;
    let sq = BoxBounds::rect([0.0, 0.0], [1.0, 1.0]);
    let full = build_grid(sq.clone(), &[n, n]).map_err(err)?;
    let punct = GridDomain::new(
        sq.clone(),
        &[n, n],
        vec![Region::Points {
            points: vec![vec![0.5, 0.5]],
        }],
    )
    .map_err(err)?;
    let slit = GridDomain::new(
        sq,
        &[n, n],
        vec![Region::Segment {
            from: vec![0.25, 0.5],
            to: vec![0.5, 0.5],
        }],
    )
    .map_err(err)?;
    let radii = [0.25];
    let samples = varcap::driver::sample_boundary_nodes(&full, 4);
    let mut notes = Vec::new();
    let mut pass = true;
    for variant in [CapacityVariant::Sobolev, CapacityVariant::Relative] {
        let o = RegularityOptions {
            variant,
            ..RegularityOptions::default()
        };
        let tag = format!("{variant:?}").to_lowercase();
        for p0 in [1.5, 2.0, 3.0] {
            let p = ExponentField::constant(p0, &full).map_err(err)?;
            let bad = samples
                .iter()
                .map(|x| regular_in_capacity_check(&full, *x, &p, &radii, 1e-8, &o))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?
                .iter()
                .filter(|r| !r.regular)
                .count();
            pass &= bad == 0;
            notes.push(format!("{tag} full p={p0}: {bad} irregular"));
        }
        for p0 in [1.5, 2.0] {
            let p = ExponentField::constant(p0, &punct).map_err(err)?;
            let r = regular_in_capacity_check(&punct, [0.5, 0.5], &p, &radii, 1e-8, &o).map_err(err)?;
            pass &= r.shrinking && !r.regular;
            notes.push(format!(
                "{tag} puncture p={p0}: trend {:.3} {}",
                r.radii[0].trend.unwrap_or(f64::NAN),
                if r.regular { "regular" } else { "irregular" }
            ));
        }
        let p = ExponentField::constant(2.0, &slit).map_err(err)?;
        let r = regular_in_capacity_check(&slit, [0.375, 0.5], &p, &radii, 1e-8, &o).map_err(err)?;
        pass &= r.regular;
        notes.push(format!(
            "{tag} slit p=2: trend {:.3} {}",
            r.radii[0].trend.unwrap_or(f64::NAN),
            if r.regular { "regular" } else { "irregular" }
        ));
    }
    Ok((pass, notes.join("; ")))
}

fn fd_check(energy: &Energy, u: &[f64], eps: f64) -> f64 {
    let n = u.len();
    let mut g = vec![0.0; n];
    energy.value_and_gradient(u, eps, &mut g);
    let mut w = u.to_vec();
    let mut worst: f64 = 0.0;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        let t = 1e-6 * (1.0 + u[i].abs());
        w[i] = u[i] + t;
        let fp = energy.value(&w, eps);
        w[i] = u[i] - t;
        let fm = energy.value(&w, eps);
        w[i] = u[i];
        let fd = (fp - fm) / (2.0 * t);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    worst
}

fn c13_gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let d = if trial % 2 == 0 {
            unit_interval(rng.gen_range(3..=9))
        } else {
            let (nx, ny) = (rng.gen_range(3..=9), rng.gen_range(3..=9));
            build_grid(BoxBounds::rect([0.0, 0.0], [1.0, 1.0]), &[nx, ny]).map_err(err)?
        };
        let (a, b): (f64, f64) = (rng.gen_range(1.3..3.0), rng.gen_range(0.0..0.5));
        let p = parse_exponent_spec(&format!("{a} + {b} * x"), &d).map_err(err)?;
        let cells = CellSet::new(&d, &p, true);
        let u: Vec<f64> = (0..d.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps = [1e-2, 1e-4][trial % 2];
        let pert = parse_perturbation(
            "(1 + x) * tanh(z)",
            &Growth {
                a: "2".into(),
                c: 1.0,
            },
            &p,
            &d,
        )
        .and_then(|b| b.with_primitive("(1 + x) * log(cosh(z))", &p, &d))
        .map_err(err)?;
        let lowers: [(&dyn LowerOrder, GradWeight); 2] =
            [(&PowerMass, GradWeight::Unit), (&pert, GradWeight::InverseP)];
        for (lower, weight) in lowers {
            let e = Energy {
                cells: &cells,
                weight,
                lower,
                exec: Execution::Sequential,
            };
            worst = worst.max(fd_check(&e, &u, eps));
        }
    }
    Ok((
        worst <= 1e-5,
        format!("max relative gradient error {worst:.2e} over 40 energies (<= 1e-5)"),
    ))
}

fn c14_determinism() -> Check {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&root)
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    entries.sort();
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut files = 0;
    let mut differing = Vec::new();
    for cfg in &entries {
        let stem = cfg.file_stem().unwrap().to_string_lossy().to_string();
        let cmd = command_for(&stem).ok_or_else(|| format!("no subcommand for {stem}"))?;
        let a = tmp.path().join(format!("{stem}-a"));
        let b = tmp.path().join(format!("{stem}-b"));
        let ra = run_config(cfg, cmd, Some(&a)).map_err(err)?;
        let rb = run_config(cfg, cmd, Some(&b)).map_err(err)?;
        if ra.status != rb.status || ra.paths.len() != rb.paths.len() {
            differing.push(stem.clone());
            continue;
        }
        for (pa, pb) in ra.paths.iter().zip(&rb.paths) {
            files += 1;
            if std::fs::read(pa).map_err(err)? != std::fs::read(pb).map_err(err)? {
                differing.push(format!("{stem}/{}", pa.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    Ok((
        differing.is_empty() && !entries.is_empty(),
        format!(
            "{} configs, {files} files compared, differing: {}",
            entries.len(),
            if differing.is_empty() {
                "none".to_string()
            } else {
                differing.join(", ")
            }
        ),
    ))
}

/// Config files are named after their subcommand.
fn command_for(stem: &str) -> Option<Command> {
    let head = stem.split('_').next()?;
    <Command as clap::ValueEnum>::from_str(head, true).ok()
}

fn main() {
    let criteria: [Criterion; 14] = [
        (1, "Luxemburg reduction", c1_luxemburg_reduction),
        (2, "unit ball and homogeneity", c2_unit_ball_homogeneity),
        (3, "Hoelder inequality", c3_holder),
        (4, "capacity axioms", c4_capacity_axioms),
        (5, "1D interval capacity oracle", c5_interval_oracle),
        (6, "closed set vs boundary capacity", c6_disk_vs_ring),
        (7, "Dirichlet exactness", c7_dirichlet_exactness),
        (8, "comparison principle", c8_comparison),
        (9, "uniqueness from random starts", c9_uniqueness),
        (10, "injectivity", c10_injectivity),
        (11, "thinness trends", c11_thinness),
        (12, "regularity in capacity", c12_regularity),
        (13, "energy gradient check", c13_gradient_check),
        (14, "determinism", c14_determinism),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {n:>2} {}: {name}: {detail} [{secs:.1} s]",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
