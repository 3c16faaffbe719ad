//! Run configuration: strict TOML, one block per subcommand.
//!
//! Every struct rejects unknown keys. `resolve` fills the subcommand name and
//! checks that the block it needs is present; the resolved config is what
//! gets echoed into the outputs, and it parses back to the same value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityOptions;
use crate::dirichlet::Growth;
use crate::domain::{BoxBounds, GridDomain, Region};
use crate::error::{Error, Result};
use crate::exponent::{parse_exponent_spec, ExponentField, Piece};
use crate::finetopo::{CapacityVariant, RegularityOptions, ThinnessOptions, ThinnessPolicy};
use crate::solver::SolverOptions;

/// Largest node count per axis accepted from a config.
pub const MAX_NODES_PER_AXIS: usize = 1025;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Norm,
    Capacity,
    Dirichlet,
    Compare,
    Inject,
    Thinness,
    Regularity,
    Zerotrace,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Norm => "norm",
            Command::Capacity => "capacity",
            Command::Dirichlet => "dirichlet",
            Command::Compare => "compare",
            Command::Inject => "inject",
            Command::Thinness => "thinness",
            Command::Regularity => "regularity",
            Command::Zerotrace => "zerotrace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nodes per axis, boundary included.
    pub nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclusions: Vec<Region>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<GridDomain> {
        if let Some(n) = self.nodes.iter().find(|&&n| n > MAX_NODES_PER_AXIS) {
            return Err(Error::Config(format!(
                "domain.nodes: {n} exceeds the limit of {MAX_NODES_PER_AXIS} per axis"
            )));
        }
        GridDomain::new(
            BoxBounds::new(self.lower.clone(), self.upper.clone()),
            &self.nodes,
            self.exclusions.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseExponent {
    pub pieces: Vec<Piece>,
    pub default: f64,
}

/// Either an expression in `x` (and `y`) or a table of rectangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentConfig {
    Expression(String),
    Piecewise(PiecewiseExponent),
}

impl ExponentConfig {
    pub fn build(&self, domain: &GridDomain) -> Result<ExponentField> {
        match self {
            ExponentConfig::Expression(text) => parse_exponent_spec(text, domain),
            ExponentConfig::Piecewise(pw) => ExponentField::piecewise(pw.pieces.clone(), pw.default, domain),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Used when `--out` is not given.
    pub dir: String,
    /// Write CSV field dumps and tables next to the JSON summary.
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "varcap-out".into(),
            csv: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Lebesgue,
    Gradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormBlock {
    pub u: String,
    /// Bisection tolerance of the Luxemburg norm.
    #[serde(default = "default_norm_tol")]
    pub tol: f64,
}

fn default_norm_tol() -> f64 {
    1e-12
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityKind {
    #[default]
    Sobolev,
    Relative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityBlock {
    #[serde(default)]
    pub kind: CapacityKind,
    /// Union of the listed regions.
    pub set: Vec<Region>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    /// `B(x, z)` as an expression in `x, y, z, p`.
    pub b: String,
    pub growth: Growth,
    /// Optional closed-form primitive in `z` (checked against `b`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primitive: Option<String>,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            b: "0".into(),
            growth: Growth::default(),
            primitive: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Zero,
    /// Seeded by the top-level `seed`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletBlock {
    /// Boundary data in `x` (and `y`), sampled at every node.
    pub boundary: String,
    #[serde(default)]
    pub init: InitKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    pub f: String,
    pub g: String,
    /// Allowed excess of `u_f` over `u_g`; defaults to 10 x solver tol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectBlock {
    pub f: String,
    pub g: String,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Check regularity in capacity at sampled boundary nodes first.
    #[serde(default)]
    pub check_regularity: bool,
    #[serde(default = "default_inject_samples")]
    pub regularity_samples: usize,
    /// Defaults to 4h.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity_radius: Option<f64>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_inject_samples() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinnessBlock {
    pub point: Vec<f64>,
    pub set: Vec<Region>,
    /// Extra points classified for the CSV map.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub map_points: Vec<Vec<f64>>,
    #[serde(default = "default_first_scale")]
    pub first_scale: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_scale: Option<u32>,
    #[serde(default)]
    pub policy: ThinnessPolicy,
}

fn default_first_scale() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityBlock {
    /// Boundary nodes sampled evenly when `points` is empty.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Capacities at or below this count as zero.
    #[serde(default = "default_cap_tol")]
    pub tol: f64,
    #[serde(default = "default_variant")]
    pub variant: CapacityVariant,
    #[serde(default = "default_true")]
    pub multiresolution: bool,
    #[serde(default = "default_shrink")]
    pub shrink_threshold: f64,
}

fn default_samples() -> usize {
    8
}

fn default_cap_tol() -> f64 {
    1e-8
}

fn default_variant() -> CapacityVariant {
    CapacityVariant::Sobolev
}

fn default_true() -> bool {
    true
}

fn default_shrink() -> f64 {
    RegularityOptions::default().shrink_threshold
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroTraceBlock {
    pub u: String,
    #[serde(default = "default_tol_value")]
    pub tol_value: f64,
    #[serde(default = "default_tol_cap")]
    pub tol_cap: f64,
}

fn default_tol_value() -> f64 {
    1e-8
}

fn default_tol_cap() -> f64 {
    1e-6
}

fn default_dilation() -> Vec<usize> {
    CapacityOptions::default().dilation_schedule
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the CLI subcommand when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    pub exponent: ExponentConfig,
    #[serde(default = "default_dilation")]
    pub dilation_schedule: Vec<usize>,
    pub domain: DomainConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject: Option<InjectBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinness: Option<ThinnessBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zerotrace: Option<ZeroTraceBlock>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn missing(cmd: Command) -> Error {
    Error::Config(format!(
        "subcommand `{}` needs a [{}] block",
        cmd.name(),
        cmd.name()
    ))
}

impl RunConfig {
    /// Parses TOML text. Errors carry the line and column, and unknown keys
    /// are named.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fixes the subcommand, fills the defaults the subcommand uses and
    /// validates tolerances.
    pub fn resolve(mut self, cmd: Command) -> Result<RunConfig> {
        if let Some(c) = self.command {
            if c != cmd {
                return Err(Error::Config(format!(
                    "config is for `{}`, not `{}`",
                    c.name(),
                    cmd.name()
                )));
            }
        }
        self.command = Some(cmd);
        self.capacity_options()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(n) = self.domain.nodes.iter().find(|&&n| n > MAX_NODES_PER_AXIS) {
            return Err(Error::Config(format!(
                "domain.nodes: {n} exceeds the limit of {MAX_NODES_PER_AXIS} per axis"
            )));
        }
        match cmd {
            Command::Norm => {
                let b = self.norm.as_ref().ok_or_else(|| missing(cmd))?;
                positive("norm.tol", b.tol)?;
            }
            Command::Capacity => {
                self.capacity.as_ref().ok_or_else(|| missing(cmd))?;
            }
            Command::Dirichlet | Command::Compare | Command::Inject => {
                if self.perturbation.is_none() {
                    self.perturbation = Some(PerturbationConfig::default());
                }
                match cmd {
                    Command::Dirichlet => {
                        self.dirichlet.as_ref().ok_or_else(|| missing(cmd))?;
                    }
                    Command::Compare => {
                        let tol = 10.0 * self.solver.tol;
                        let b = self.compare.as_mut().ok_or_else(|| missing(cmd))?;
                        let t = *b.tol.get_or_insert(tol);
                        positive("compare.tol", t)?;
                    }
                    _ => {
                        let b = self.inject.as_ref().ok_or_else(|| missing(cmd))?;
                        positive("inject.delta", b.delta)?;
                        if let Some(r) = b.regularity_radius {
                            positive("inject.regularity_radius", r)?;
                        }
                    }
                }
            }
            Command::Thinness => {
                self.thinness.as_ref().ok_or_else(|| missing(cmd))?;
            }
            Command::Regularity => {
                let b = self.regularity.as_ref().ok_or_else(|| missing(cmd))?;
                positive("regularity.tol", b.tol)?;
                positive("regularity.shrink_threshold", b.shrink_threshold)?;
                for r in &b.radii {
                    positive("regularity.radii", *r)?;
                }
            }
            Command::Zerotrace => {
                let b = self.zerotrace.as_ref().ok_or_else(|| missing(cmd))?;
                positive("zerotrace.tol_value", b.tol_value)?;
                positive("zerotrace.tol_cap", b.tol_cap)?;
            }
        }
        Ok(self)
    }

    pub fn command(&self) -> Option<Command> {
        self.command
    }

    pub fn capacity_options(&self) -> CapacityOptions {
        CapacityOptions {
            solver: self.solver.clone(),
            dilation_schedule: self.dilation_schedule.clone(),
        }
    }

    pub fn thinness_options(&self) -> Option<ThinnessOptions> {
        self.thinness.as_ref().map(|t| ThinnessOptions {
            capacity: self.capacity_options(),
            first_scale: t.first_scale,
            last_scale: t.last_scale,
            policy: t.policy.clone(),
        })
    }

    pub fn regularity_options(&self) -> Option<RegularityOptions> {
        self.regularity.as_ref().map(|r| RegularityOptions {
            capacity: self.capacity_options(),
            variant: r.variant,
            multiresolution: r.multiresolution,
            shrink_threshold: r.shrink_threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NORM: &str = r#"
exponent = "2"

[domain]
lower = [0.0]
upper = [1.0]
nodes = [65]

[norm]
u = "1"
"#;

    #[test]
    fn minimal_norm_config_parses() {
        let c = RunConfig::from_toml_str(NORM).unwrap();
        assert_eq!(c.exponent, ExponentConfig::Expression("2".into()));
        assert_eq!(c.norm.as_ref().unwrap().tol, 1e-12);
        assert_eq!(c.solver, SolverOptions::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let text = NORM.replace("exponent =", "exponentt =");
        let e = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("exponentt"), "{e}");
        let text = NORM.replace("[norm]", "[norm]\nmode = 1");
        let e = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("mode"), "{e}");
        let text = NORM.replace("[domain]", "[solver]\ntoll = 1e-3\n[domain]");
        let e = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("toll"), "{e}");
    }

    #[test]
    fn parse_errors_report_line_and_column() {
        let e = RunConfig::from_toml_str("exponent = \"2\"\n[domain\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(e.contains("column"), "{e}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"
exponent = { pieces = [{ lower = [0.0, 0.0], upper = [0.5, 1.0], value = 3.0 }], default = 2.0 }
seed = 7

[domain]
lower = [0.0, 0.0]
upper = [1.0, 1.0]
nodes = [9, 9]
exclusions = [{ kind = "ball", center = [0.5, 0.5], radius = 0.1 }]

[compare]
f = "x"
g = "x + 1"
"#;
        let c = RunConfig::from_toml_str(text)
            .unwrap()
            .resolve(Command::Compare)
            .unwrap();
        assert_eq!(c.compare.as_ref().unwrap().tol, Some(10.0 * c.solver.tol));
        assert!(c.perturbation.is_some());
        let echo = c.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&echo).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.clone().resolve(Command::Compare).unwrap(), c);
    }

    #[test]
    fn resolve_checks_command_and_block() {
        let c = RunConfig::from_toml_str(NORM).unwrap();
        assert!(matches!(
            c.clone().resolve(Command::Capacity),
            Err(Error::Config(_))
        ));
        let text = format!("command = \"capacity\"\n{NORM}");
        let c2 = RunConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c2.resolve(Command::Norm), Err(Error::Config(_))));
        let text = NORM.replace("nodes = [65]", "nodes = [2049]");
        let c3 = RunConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c3.resolve(Command::Norm), Err(Error::Config(_))));
        let text = NORM.replace("[domain]", "[solver]\ntol = -1.0\n[domain]");
        let c4 = RunConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c4.resolve(Command::Norm), Err(Error::Config(_))));
        assert_eq!(c.resolve(Command::Norm).unwrap().command(), Some(Command::Norm));
    }
}
