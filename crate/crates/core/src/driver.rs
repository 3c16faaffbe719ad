//! Run orchestration and output emission.
//!
//! Floats are written as `{:.16e}` (17 significant digits, exact round
//! trip), JSON object keys are sorted, and nothing time- or host-dependent
//! goes into the files, so reruns of a config are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::capacity::{relative_capacity, sobolev_capacity, CapacityResult};
use crate::config::{CapacityKind, Command, InitKind, RunConfig};
use crate::dirichlet::{
    comparison_check, injectivity_probe, parse_perturbation, solve_dirichlet, DirichletSpec, Init,
    SolutionReport,
};
use crate::domain::{regions_mask, GridDomain, GridFunction, Point, SetMask};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::expr::{self, Var};
use crate::finetopo::{
    regular_in_capacity_check, zero_trace_check, CapacityVariant, RegularityOptions, RegularityReport,
    ThinnessContext,
};
use crate::modular::{gradient_norm, lebesgue_modular, luxemburg_norm, sobolev_modular};

/// A node field on the run's domain.
#[derive(Clone, Debug)]
pub struct FieldDump {
    pub name: String,
    pub values: Vec<f64>,
    /// Written as integers (masks).
    pub integer: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// Everything a run produces before it is written.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub command: Command,
    pub results: Value,
    pub fields: Vec<FieldDump>,
    pub tables: Vec<Table>,
    pub converged: bool,
}

impl Artifacts {
    fn new(command: Command) -> Self {
        Artifacts {
            command,
            results: Value::Object(Map::new()),
            fields: Vec::new(),
            tables: Vec::new(),
            converged: true,
        }
    }
}

/// How a run ended; maps to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    NotConverged,
    Failed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::Failed => 1,
            RunStatus::NotConverged => 2,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn point_of(v: &[f64], dim: usize, what: &str) -> Result<Point> {
    if v.len() != dim {
        return Err(Error::Config(format!(
            "{what}: expected {dim} coordinates, got {}",
            v.len()
        )));
    }
    Ok([v[0], if dim > 1 { v[1] } else { 0.0 }])
}

fn space_vars(domain: &GridDomain) -> &'static [Var] {
    if domain.dim() == 2 {
        &[Var::X, Var::Y]
    } else {
        &[Var::X]
    }
}

/// Samples an expression in `x` (and `y`) at every node.
pub fn sample_expression(text: &str, domain: &GridDomain) -> Result<GridFunction> {
    let e = expr::parse(text, space_vars(domain))?;
    GridFunction::from_expr(domain, &e)
}

fn mask_dump(name: &str, m: &SetMask) -> FieldDump {
    FieldDump {
        name: name.into(),
        values: m.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        integer: true,
    }
}

fn field_dump(name: &str, u: &GridFunction) -> FieldDump {
    FieldDump {
        name: name.into(),
        values: u.values().to_vec(),
        integer: false,
    }
}

fn capacity_json(c: &CapacityResult) -> Value {
    json!({
        "value": c.value,
        "iterations": c.iterations,
        "converged": c.converged,
        "dilation_level": c.dilation_level,
        "solver_tol": c.solver_tol,
        "levels": to_value(&c.levels),
        "final_energy": c.energy_trajectory.last().copied(),
        "energy_evaluations": c.energy_trajectory.len(),
    })
}

fn solution_json(s: &SolutionReport) -> Value {
    json!({
        "energy": s.energy,
        "residual": s.residual_inf,
        "iterations": s.iterations,
        "converged": s.converged,
        "stationarity": s.stationarity,
        "energy_evaluations": s.energy_trajectory.len(),
    })
}

fn dirichlet_spec(
    cfg: &RunConfig,
    domain: &GridDomain,
    p: &ExponentField,
    boundary: &str,
) -> Result<DirichletSpec> {
    let pc = cfg.perturbation.clone().unwrap_or_default();
    let mut b = parse_perturbation(&pc.b, &pc.growth, p, domain)?;
    if let Some(prim) = &pc.primitive {
        b = b.with_primitive(prim, p, domain)?;
    }
    DirichletSpec::new(domain.clone(), p, b, sample_expression(boundary, domain)?)
}

/// Evenly spaced nodes of the boundary of `omega`.
pub fn sample_boundary_nodes(omega: &GridDomain, samples: usize) -> Vec<Point> {
    let nodes: Vec<usize> = omega.omega_boundary_mask().indices().collect();
    if nodes.is_empty() || samples == 0 {
        return Vec::new();
    }
    let mut picked: Vec<usize> = (0..samples.min(nodes.len()))
        .map(|i| nodes[i * nodes.len() / samples.min(nodes.len())])
        .collect();
    picked.dedup();
    picked.into_iter().map(|k| omega.node_point(k)).collect()
}

fn regularity_rows(reports: &[RegularityReport], dim: usize) -> Table {
    let mut header: Vec<String> = ["x", "y"][..dim].iter().map(|s| s.to_string()).collect();
    header.extend(["regular", "positive", "shrinking", "min_ratio", "min_trend"].map(String::from));
    let rows = reports
        .iter()
        .map(|r| {
            let mut row: Vec<Cell> = r.point.iter().map(|&v| Cell::Num(v)).collect();
            row.push(Cell::Int(r.regular as i64));
            row.push(Cell::Int(r.positive as i64));
            row.push(Cell::Int(r.shrinking as i64));
            row.push(Cell::Num(
                r.radii.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min),
            ));
            row.push(match r.radii.iter().filter_map(|c| c.trend).reduce(f64::min) {
                Some(t) => Cell::Num(t),
                None => Cell::Text(String::new()),
            });
            row
        })
        .collect();
    Table {
        name: "regularity".into(),
        header,
        rows,
    }
}

fn check_points(
    omega: &GridDomain,
    points: &[Point],
    p: &ExponentField,
    radii: &[f64],
    tol: f64,
    opts: &RegularityOptions,
) -> Result<Vec<RegularityReport>> {
    points
        .iter()
        .map(|&x| regular_in_capacity_check(omega, x, p, radii, tol, opts))
        .collect()
}

/// Runs the resolved config. Errors are configuration or precondition
/// failures; non-convergence is reported through `Artifacts::converged`.
pub fn run(cfg: &RunConfig) -> Result<Artifacts> {
    let cmd = cfg
        .command()
        .ok_or_else(|| Error::Config("config is not resolved to a subcommand".into()))?;
    let domain = cfg.domain.build()?;
    let p = cfg.exponent.build(&domain)?;
    let dim = domain.dim();
    let mut out = Artifacts::new(cmd);
    let mut res = Map::new();
    res.insert("p_minus".into(), json!(p.p_minus()));
    res.insert("p_plus".into(), json!(p.p_plus()));
    info!(
        "{} on {:?} nodes, p in [{}, {}]",
        cmd.name(),
        domain.counts(),
        p.p_minus(),
        p.p_plus()
    );
    match cmd {
        Command::Norm => {
            let b = cfg.norm.as_ref().expect("resolved");
            let u = sample_expression(&b.u, &domain)?;
            let lux = luxemburg_norm(&u, &p, &domain, b.tol)?;
            let grad = gradient_norm(&u, &p, &domain, b.tol)?;
            res.insert("modular".into(), json!(lebesgue_modular(&u, &p, &domain)?));
            res.insert("sobolev_modular".into(), json!(sobolev_modular(&u, &p, &domain)?));
            res.insert("luxemburg_norm".into(), json!(lux.value));
            res.insert("gradient_norm".into(), json!(grad.value));
            res.insert("sobolev_norm".into(), json!(lux.value + grad.value));
            res.insert(
                "iterations".into(),
                json!(lux.bisection_iterations + grad.bisection_iterations),
            );
            res.insert("tolerance".into(), json!(b.tol));
        }
        Command::Capacity => {
            let b = cfg.capacity.as_ref().expect("resolved");
            let e = regions_mask(&domain, &b.set)?;
            let opts = cfg.capacity_options();
            let c = match b.kind {
                CapacityKind::Sobolev => sobolev_capacity(&e, &p, &domain, &opts)?,
                CapacityKind::Relative => relative_capacity(&e, &p, &domain, &opts)?,
            };
            out.converged = c.converged;
            res.insert("kind".into(), to_value(&b.kind));
            res.insert("set_nodes".into(), json!(e.count()));
            res.insert("capacity".into(), capacity_json(&c));
            out.fields.push(field_dump("minimizer", &c.minimizer));
        }
        Command::Dirichlet => {
            let b = cfg.dirichlet.as_ref().expect("resolved");
            let spec = dirichlet_spec(cfg, &domain, &p, &b.boundary)?;
            let init = match b.init {
                InitKind::Zero => Init::Zero,
                InitKind::Random => Init::Random { seed: cfg.seed },
            };
            let s = solve_dirichlet(&spec, &init, &cfg.solver)?;
            out.converged = s.converged;
            res.insert("perturbation".into(), to_value(&spec.perturbation.kind()));
            res.insert(
                "exponent_below_dimension".into(),
                json!(spec.exponent_below_dimension()),
            );
            res.insert("solution".into(), solution_json(&s));
            out.fields.push(field_dump("u", &s.u));
        }
        Command::Compare => {
            let b = cfg.compare.as_ref().expect("resolved");
            let spec = dirichlet_spec(cfg, &domain, &p, &b.f)?;
            let g = sample_expression(&b.g, &domain)?;
            let tol = b.tol.expect("resolved");
            let r = comparison_check(&spec.boundary, &g, &spec, &cfg.solver, tol)?;
            out.converged = r.lower.converged && r.upper.converged;
            res.insert("holds".into(), json!(r.holds));
            res.insert("max_excess".into(), json!(r.max_excess));
            res.insert("tol".into(), json!(r.tol));
            res.insert("u_f".into(), solution_json(&r.lower));
            res.insert("u_g".into(), solution_json(&r.upper));
            out.fields.push(field_dump("u_f", &r.lower.u));
            out.fields.push(field_dump("u_g", &r.upper.u));
        }
        Command::Inject => {
            let b = cfg.inject.as_ref().expect("resolved");
            if b.check_regularity {
                let h = domain.min_spacing();
                let radius = b.regularity_radius.unwrap_or(4.0 * h);
                let opts = RegularityOptions {
                    capacity: cfg.capacity_options(),
                    variant: CapacityVariant::Relative,
                    multiresolution: true,
                    ..RegularityOptions::default()
                };
                let pts = sample_boundary_nodes(&domain, b.regularity_samples);
                let reports = check_points(&domain, &pts, &p, &[radius], 1e-8, &opts)?;
                let regular = reports.iter().all(|r| r.regular);
                res.insert("regularity".into(), to_value(&reports));
                out.tables.push(regularity_rows(&reports, dim));
                if !regular {
                    return Err(Error::Precondition(
                        "domain is not regular in capacity at a sampled boundary node".into(),
                    ));
                }
            }
            let spec = dirichlet_spec(cfg, &domain, &p, &b.f)?;
            let g = sample_expression(&b.g, &domain)?;
            let r = injectivity_probe(&spec.boundary, &g, &spec, &cfg.solver, b.delta)?;
            out.converged = r.converged;
            res.insert("probe".into(), to_value(&r));
        }
        Command::Thinness => {
            let b = cfg.thinness.as_ref().expect("resolved");
            let opts = cfg.thinness_options().expect("resolved");
            let e = regions_mask(&domain, &b.set)?;
            let a = point_of(&b.point, dim, "thinness.point")?;
            let series = ThinnessContext::new(a, &p, &domain, &opts)?.series(&e)?;
            out.converged = series.scales.iter().all(|s| s.converged);
            res.insert("set_nodes".into(), json!(e.count()));
            res.insert("series".into(), to_value(&series));
            let mut header: Vec<String> = [
                "j",
                "radius",
                "numerator",
                "denominator",
                "ratio",
                "term",
                "partial_sum",
            ]
            .map(String::from)
            .to_vec();
            header.push("converged".into());
            out.tables.push(Table {
                name: "scales".into(),
                header,
                rows: series
                    .scales
                    .iter()
                    .map(|s| {
                        vec![
                            Cell::Int(s.j as i64),
                            Cell::Num(s.radius),
                            Cell::Num(s.numerator),
                            Cell::Num(s.denominator),
                            Cell::Num(s.ratio),
                            Cell::Num(s.term),
                            Cell::Num(s.partial_sum),
                            Cell::Int(s.converged as i64),
                        ]
                    })
                    .collect(),
            });
            if !b.map_points.is_empty() {
                let mut header: Vec<String> = ["x", "y"][..dim].iter().map(|s| s.to_string()).collect();
                header.extend(["classification", "partial_sum", "scales"].map(String::from));
                let mut rows = Vec::new();
                let mut map = Vec::new();
                for q in &b.map_points {
                    let x = point_of(q, dim, "thinness.map_points")?;
                    let s = ThinnessContext::new(x, &p, &domain, &opts)?.series(&e)?;
                    out.converged &= s.scales.iter().all(|t| t.converged);
                    let mut row: Vec<Cell> = q.iter().map(|&v| Cell::Num(v)).collect();
                    row.push(Cell::Text(
                        to_value(&s.classification).as_str().unwrap_or("").into(),
                    ));
                    row.push(Cell::Num(s.partial_sums().last().copied().unwrap_or(0.0)));
                    row.push(Cell::Int(s.scales.len() as i64));
                    rows.push(row);
                    map.push(json!({"point": q, "classification": s.classification}));
                }
                res.insert("map".into(), Value::Array(map));
                out.tables.push(Table {
                    name: "classification".into(),
                    header,
                    rows,
                });
            }
        }
        Command::Regularity => {
            let b = cfg.regularity.as_ref().expect("resolved");
            let opts = cfg.regularity_options().expect("resolved");
            let pts = if b.points.is_empty() {
                sample_boundary_nodes(&domain, b.samples)
            } else {
                b.points
                    .iter()
                    .map(|q| point_of(q, dim, "regularity.points"))
                    .collect::<Result<Vec<_>>>()?
            };
            let reports = check_points(&domain, &pts, &p, &b.radii, b.tol, &opts)?;
            out.converged = reports.iter().all(|r| r.radii.iter().all(|c| c.converged));
            res.insert("regular".into(), json!(reports.iter().all(|r| r.regular)));
            res.insert("points".into(), to_value(&reports));
            out.tables.push(regularity_rows(&reports, dim));
        }
        Command::Zerotrace => {
            let b = cfg.zerotrace.as_ref().expect("resolved");
            let u = sample_expression(&b.u, &domain)?;
            let r = zero_trace_check(&u, &domain, &p, b.tol_value, b.tol_cap, &cfg.capacity_options())?;
            res.insert("zero_trace".into(), json!(r.zero_trace));
            res.insert("capacity".into(), json!(r.capacity));
            res.insert("exceptional_nodes".into(), json!(r.exceptional.count()));
            out.fields.push(mask_dump("exceptional", &r.exceptional));
        }
    }
    out.results = Value::Object(res);
    Ok(out)
}

/// `{:.16e}`: 17 significant digits. Non-finite values become `null` in
/// JSON and empty cells in CSV.
pub fn format_float(x: f64) -> Option<String> {
    x.is_finite().then(|| format!("{x:.16e}"))
}

fn write_json(v: &Value, indent: usize, s: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => s.push_str("null"),
        Value::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                s.push_str(&n.as_f64().and_then(format_float).unwrap_or_else(|| "null".into()));
            } else {
                s.push_str(&n.to_string());
            }
        }
        Value::String(t) => s.push_str(&Value::String(t.clone()).to_string()),
        Value::Array(a) if a.is_empty() => s.push_str("[]"),
        Value::Array(a) => {
            s.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                s.push_str(&pad(indent + 1));
                write_json(x, indent + 1, s);
                s.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            s.push_str(&pad(indent));
            s.push(']');
        }
        Value::Object(m) if m.is_empty() => s.push_str("{}"),
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            s.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                s.push_str(&pad(indent + 1));
                s.push_str(&Value::String((*k).clone()).to_string());
                s.push_str(": ");
                write_json(&m[*k], indent + 1, s);
                s.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            s.push_str(&pad(indent));
            s.push('}');
        }
    }
}

/// Pretty JSON with sorted keys and 17-digit floats, newline-terminated.
pub fn to_json_string(v: &Value) -> String {
    let mut s = String::new();
    write_json(v, 0, &mut s);
    s.push('\n');
    s
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn csv_num(x: f64) -> String {
    format_float(x).unwrap_or_default()
}

/// Row-major grid dump. 1D: header `x,<name>`, one row per node. 2D:
/// header `y\x` followed by the x coordinates, one row per y.
pub fn grid_csv(domain: &GridDomain, f: &FieldDump) -> String {
    let cell = |v: f64| {
        if f.integer {
            format!("{}", v as i64)
        } else {
            csv_num(v)
        }
    };
    let mut s = String::new();
    let xs = domain.axis_coords(0);
    if domain.dim() == 1 {
        let _ = writeln!(s, "x,{}", csv_field(&f.name));
        for (i, x) in xs.iter().enumerate() {
            let _ = writeln!(s, "{},{}", csv_num(*x), cell(f.values[i]));
        }
    } else {
        let ys = domain.axis_coords(1);
        s.push_str("y\\x");
        for x in &xs {
            s.push(',');
            s.push_str(&csv_num(*x));
        }
        s.push('\n');
        for (j, y) in ys.iter().enumerate() {
            s.push_str(&csv_num(*y));
            for i in 0..xs.len() {
                s.push(',');
                s.push_str(&cell(f.values[domain.node_index(i, j)]));
            }
            s.push('\n');
        }
    }
    s
}

pub fn table_csv(t: &Table) -> String {
    let mut s = String::new();
    let head: Vec<String> = t.header.iter().map(|h| csv_field(h)).collect();
    s.push_str(&head.join(","));
    s.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(x) => csv_num(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Text(t) => csv_field(t),
            })
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// The JSON summary: metadata, the resolved config echo and, when the run
/// got that far, its results.
pub fn summary(
    cmd: Command,
    resolved: Option<&RunConfig>,
    artifacts: Option<&Artifacts>,
    error: Option<&Error>,
    files: &[String],
) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), json!(cmd.name()));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    if let Some(c) = resolved {
        if let Ok(t) = c.to_toml_string() {
            m.insert("resolved_config".into(), json!(t));
        }
    }
    if let Some(a) = artifacts {
        m.insert("converged".into(), json!(a.converged));
        m.insert("results".into(), a.results.clone());
    }
    if let Some(e) = error {
        m.insert("error".into(), json!(e.to_string()));
    }
    m.insert("files".into(), json!(files));
    Value::Object(m)
}

/// Writes `<cmd>.json`, `resolved_config.toml` and the CSV dumps into
/// `dir`; returns the written paths in order.
pub fn emit_outputs(
    dir: &Path,
    cmd: Command,
    resolved: Option<&RunConfig>,
    artifacts: Option<&Artifacts>,
    error: Option<&Error>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, text: &str| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    };
    let mut names = Vec::new();
    let mut texts = Vec::new();
    if let Some(c) = resolved {
        names.push("resolved_config.toml".to_string());
        texts.push(c.to_toml_string()?);
        if let (Some(a), true) = (artifacts, c.output.csv) {
            let domain = c.domain.build()?;
            for f in &a.fields {
                names.push(format!("{}_{}.csv", cmd.name(), f.name));
                texts.push(grid_csv(&domain, f));
            }
            for t in &a.tables {
                names.push(format!("{}_{}.csv", cmd.name(), t.name));
                texts.push(table_csv(t));
            }
        }
    }
    let json_name = format!("{}.json", cmd.name());
    let mut paths = vec![write(
        &json_name,
        &to_json_string(&summary(cmd, resolved, artifacts, error, &names)),
    )?];
    for (n, t) in names.iter().zip(&texts) {
        paths.push(write(n, t)?);
    }
    Ok(paths)
}

/// Outcome of `run_config`: the status, the files written and the error
/// that stopped the run, if any.
#[derive(Debug)]
pub struct RunReport {
    pub status: RunStatus,
    pub paths: Vec<PathBuf>,
    pub error: Option<Error>,
}

/// Reads, resolves and runs the config at `path`, then writes the outputs
/// (metadata only on failure) into `out`, or the configured directory.
/// Config errors are returned before anything is written.
pub fn run_config(path: &Path, cmd: Command, out: Option<&Path>) -> Result<RunReport> {
    let cfg = RunConfig::from_path(path)?.resolve(cmd)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    match run(&cfg) {
        Ok(a) => {
            let status = if a.converged {
                RunStatus::Converged
            } else {
                warn!("solver did not converge; outputs are partial");
                RunStatus::NotConverged
            };
            let paths = emit_outputs(&dir, cmd, Some(&cfg), Some(&a), None)?;
            Ok(RunReport {
                status,
                paths,
                error: None,
            })
        }
        Err(e) => {
            warn!("{} failed: {e}", cmd.name());
            let paths = emit_outputs(&dir, cmd, Some(&cfg), None, Some(&e))?;
            Ok(RunReport {
                status: RunStatus::Failed,
                paths,
                error: Some(e),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_digits_and_round_trip() {
        for x in [1.0, 0.1, -2.5e-300, 1.0 / 3.0, f64::MAX] {
            let s = format_float(x).unwrap();
            let digits = s
                .split('e')
                .next()
                .unwrap()
                .chars()
                .filter(char::is_ascii_digit)
                .count();
            assert_eq!(digits, 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_float(f64::NAN), None);
    }

    #[test]
    fn json_is_sorted_and_valid() {
        let v = json!({"b": 1.5, "a": [1, 2.0, null], "c": {"z": true, "y": "t\"x"}, "d": {}, "e": []});
        let s = to_json_string(&v);
        assert!(s.ends_with('\n'));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let a = s.find("\"a\"").unwrap();
        let b = s.find("\"b\"").unwrap();
        assert!(a < b);
        assert!(s.contains("1.5000000000000000e0"));
    }

    #[test]
    fn empty_results_give_metadata_only() {
        let v = summary(Command::Norm, None, None, None, &[]);
        let s = to_json_string(&v);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["command"], "norm");
        assert!(back.get("results").is_none());
    }

    #[test]
    fn grid_dump_shape() {
        let d = GridDomain::new(
            crate::domain::BoxBounds::rect([0.0, 0.0], [1.0, 1.0]),
            &[3, 3],
            vec![],
        )
        .unwrap();
        let f = FieldDump {
            name: "u".into(),
            values: (0..9).map(f64::from).collect(),
            integer: false,
        };
        let s = grid_csv(&d, &f);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(s.ends_with('\n'));
        assert_eq!(
            lines[0],
            "y\\x,0.0000000000000000e0,5.0000000000000000e-1,1.0000000000000000e0"
        );
        assert!(lines[2].starts_with("5.0000000000000000e-1,3.0000000000000000e0,"));
        let m = FieldDump { integer: true, ..f };
        assert_eq!(
            grid_csv(&d, &m).lines().nth(3).unwrap(),
            "1.0000000000000000e0,6,7,8"
        );
    }

    #[test]
    fn boundary_samples_are_boundary_nodes() {
        let d = GridDomain::new(
            crate::domain::BoxBounds::rect([0.0, 0.0], [1.0, 1.0]),
            &[9, 9],
            vec![],
        )
        .unwrap();
        let pts = sample_boundary_nodes(&d, 8);
        assert_eq!(pts.len(), 8);
        for x in pts {
            assert!(d.is_boundary(d.nearest_node(x)));
        }
    }
}
