//! Experiment configuration: one TOML document per experiment.
//!
//! Every section is optional and filled with defaults; unknown keys are
//! rejected with the path of the offending field.

use std::fmt;
use std::path::PathBuf;

use degenlab_core::coefficients::{CoefficientParams, Family, SmoothOperatorF};
use degenlab_core::exact::{ExactSolution, QuadraticDatum};
use degenlab_core::grid::Domain;
use degenlab_core::linalg::{SymMatrix, Vector};
use degenlab_core::solver::ProblemSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    SweepEps,
    Exponents,
    BernsteinCheck,
    JetFuzz,
    BarrierCheck,
    ScalingCheck,
    Convergence,
}

impl Command {
    pub fn slug(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SweepEps => "sweep_eps",
            Command::Exponents => "exponents",
            Command::BernsteinCheck => "bernstein",
            Command::JetFuzz => "jet_fuzz",
            Command::BarrierCheck => "barrier",
            Command::ScalingCheck => "scaling",
            Command::Convergence => "convergence",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SweepEps => "sweep-eps",
            Command::Exponents => "exponents",
            Command::BernsteinCheck => "bernstein-check",
            Command::JetFuzz => "jet-fuzz",
            Command::BarrierCheck => "barrier-check",
            Command::ScalingCheck => "scaling-check",
            Command::Convergence => "convergence",
        }
    }

    /// Commands that evolve the problem in time.
    fn evolves(self) -> bool {
        matches!(
            self,
            Command::Solve | Command::SweepEps | Command::BernsteinCheck | Command::Convergence
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    PLaplace,
    FullyNonlinear,
    GeneralQuasilinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorConfig {
    Trace,
    /// Smoothed maximum of `tr(A_k M)`; each matrix given by rows.
    Bellman { matrices: Vec<Vec<Vec<f64>>>, scale: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    /// The family's radial closed-form solution.
    Exact,
    /// `cos(pi x_1) cos(pi x_2)`, constant in time.
    Cosine,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub family: FamilyName,
    pub p: f64,
    pub gamma: f64,
    pub operator: OperatorConfig,
    pub epsilon: f64,
    pub dim: usize,
    /// Half-width of the cube; the time span is `(-extent^2, 0]`.
    pub extent: f64,
    pub h: f64,
    pub data: DataKind,
    pub gradient_cap: Option<f64>,
    pub dt: Option<f64>,
    pub max_stored_intervals: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            family: FamilyName::PLaplace,
            p: 3.0,
            gamma: 1.0,
            operator: OperatorConfig::Trace,
            epsilon: 0.05,
            dim: 2,
            extent: 0.75,
            h: 1.0 / 32.0,
            data: DataKind::Exact,
            gradient_cap: None,
            dt: None,
            max_stored_intervals: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    pub monitor_radius: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.2, 0.1, 0.05, 0.025],
            monitor_radius: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsConfig {
    /// Exponents for the analytic Hölder fits.
    pub p_values: Vec<f64>,
    /// Random draws for the exponent identities.
    pub algebra_samples: usize,
    pub domination_samples: usize,
    /// Also fit the solver output of `[problem]` (costly at fine spacing).
    pub solver_fit: bool,
}

impl Default for ExponentsConfig {
    fn default() -> Self {
        Self {
            p_values: vec![2.5, 3.0, 4.0],
            algebra_samples: 100,
            domination_samples: 200,
            solver_fit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BernsteinSection {
    /// Delta ladder `2^lo ..= 2^hi`.
    pub ladder_lo: i32,
    pub ladder_hi: i32,
    pub time_steps: usize,
}

impl Default for BernsteinSection {
    fn default() -> Self {
        Self {
            ladder_lo: -10,
            ladder_hi: 10,
            time_steps: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzConfig {
    pub samples: usize,
    pub p_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub dim: usize,
    /// Fraction of samples drawn as rank-one aligned configurations.
    pub aligned_fraction: f64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            p_values: vec![2.5, 3.0, 4.0],
            gamma_values: vec![0.5, 1.0, 2.0],
            epsilons: vec![0.1, 0.0],
            dim: 2,
            aligned_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhiConfig {
    pub constant: f64,
    pub linear: Vec<f64>,
    /// Rows of the Hessian.
    pub hessian: Vec<Vec<f64>>,
    pub time_rate: f64,
}

impl Default for PhiConfig {
    fn default() -> Self {
        Self {
            constant: 0.0,
            linear: vec![1.0, 0.0],
            hessian: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            time_rate: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub p: f64,
    pub epsilon: f64,
    pub phi: PhiConfig,
    /// Defaults to `sup |phi|` on the unit half-cylinder.
    pub bound_u: Option<f64>,
    pub sample_h: f64,
    /// Spacing of the half-cube solve; zero skips it.
    pub solve_h: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            p: 3.0,
            epsilon: 0.1,
            phi: PhiConfig::default(),
            bound_u: None,
            sample_h: 1.0 / 64.0,
            solve_h: 1.0 / 32.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub r: f64,
    pub rho: f64,
    pub p_values: Vec<f64>,
    pub annulus_points: usize,
    /// Run the three-case discrete comparison suite.
    pub comparison: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            r: 0.5,
            rho: 2.0,
            p_values: vec![2.5, 3.0, 4.0, 6.0],
            annulus_points: 100,
            comparison: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Number of halvings of `[problem].h`.
    pub refinements: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { refinements: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Pairwise relative spread of `sup |u_t|` across the epsilon ladder.
    pub spread: f64,
    /// Relative band around the family constant.
    pub band: f64,
    pub residual: f64,
    pub algebra: f64,
    pub holder_analytic: f64,
    pub holder_solver: f64,
    pub barrier_defect: f64,
    pub comparison_slack: f64,
    pub refinement_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            spread: 0.05,
            band: 0.1,
            residual: 1e-10,
            algebra: 1e-12,
            holder_analytic: 1e-6,
            holder_solver: 0.1,
            barrier_defect: 1e-8,
            comparison_slack: 1e-10,
            refinement_ratio: 1.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub exponents: ExponentsConfig,
    #[serde(default)]
    pub bernstein: BernsteinSection,
    #[serde(default)]
    pub fuzz: FuzzConfig,
    #[serde(default)]
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub struct ConfigError {
    /// Dotted path of the offending field, empty for document-level errors.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parses and validates a document; the command is taken from the document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| err("", e.message().to_string()))?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        err(&path, e.into_inner().message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a document for `command`; a conflicting `command` key is an error.
pub fn parse_for_command(text: &str, command: Command) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = parse_config(text)?;
    match cfg.command {
        Some(c) if c != command => {
            return Err(err(
                "command",
                format!("document is for {} but {} was requested", c.name(), command.name()),
            ))
        }
        _ => cfg.command = Some(command),
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("configs always serialize")
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(err(path, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pr = &self.problem;
        if !(1..=2).contains(&pr.dim) {
            return Err(err("problem.dim", format!("must be 1 or 2, got {}", pr.dim)));
        }
        positive("problem.extent", pr.extent)?;
        positive("problem.h", pr.h)?;
        let ratio = pr.extent / pr.h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(err("problem.h", format!("extent / h = {ratio} must be an integer")));
        }
        if !(pr.epsilon >= 0.0 && pr.epsilon.is_finite()) {
            return Err(err("problem.epsilon", format!("must be >= 0, got {}", pr.epsilon)));
        }
        if let Some(g) = pr.gradient_cap {
            positive("problem.gradient_cap", g)?;
        }
        if let Some(dt) = pr.dt {
            positive("problem.dt", dt)?;
        }
        if pr.max_stored_intervals == 0 {
            return Err(err("problem.max_stored_intervals", "must be at least 1"));
        }
        match pr.family {
            FamilyName::PLaplace | FamilyName::GeneralQuasilinear if !(pr.p > 1.0) => {
                return Err(err("problem.p", format!("must exceed 1, got {}", pr.p)))
            }
            FamilyName::FullyNonlinear | FamilyName::GeneralQuasilinear if !(pr.gamma > 0.0) => {
                return Err(err("problem.gamma", format!("must be positive, got {}", pr.gamma)))
            }
            _ => {}
        }
        if let OperatorConfig::Bellman { matrices, scale } = &pr.operator {
            positive("problem.operator.scale", *scale)?;
            if matrices.is_empty() {
                return Err(err("problem.operator.matrices", "at least one matrix is required"));
            }
        }
        if let Some(cmd) = self.command {
            if cmd.evolves() {
                if !(pr.epsilon > 0.0) {
                    return Err(err("problem.epsilon", "must be positive for evolution"));
                }
                if matches!(pr.family, FamilyName::PLaplace) && !(pr.p > 2.0) {
                    return Err(err("problem.p", "p must exceed 2 for evolution"));
                }
                if matches!(pr.family, FamilyName::GeneralQuasilinear) && pr.p < 2.0 {
                    return Err(err("problem.p", "p must be at least 2 for evolution"));
                }
                if pr.data == DataKind::Exact && self.exact_solution().is_none() {
                    return Err(err("problem.data", "this family has no closed-form solution"));
                }
            }
        }
        if self.sweep.eps.is_empty() || self.sweep.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(err("sweep.eps", "must be nonempty and strictly decreasing"));
        }
        for (i, e) in self.sweep.eps.iter().enumerate() {
            positive(&format!("sweep.eps[{i}]"), *e)?;
        }
        positive("sweep.monitor_radius", self.sweep.monitor_radius)?;
        for (i, p) in self.exponents.p_values.iter().enumerate() {
            if !(*p > 2.0) {
                return Err(err(&format!("exponents.p_values[{i}]"), format!("must exceed 2, got {p}")));
            }
        }
        if self.bernstein.ladder_lo > self.bernstein.ladder_hi {
            return Err(err("bernstein.ladder_lo", "must not exceed ladder_hi"));
        }
        if self.bernstein.time_steps == 0 {
            return Err(err("bernstein.time_steps", "must be at least 1"));
        }
        if !(1..=3).contains(&self.fuzz.dim) {
            return Err(err("fuzz.dim", format!("must be 1, 2 or 3, got {}", self.fuzz.dim)));
        }
        for (i, p) in self.fuzz.p_values.iter().enumerate() {
            if !(*p >= 2.0) {
                return Err(err(&format!("fuzz.p_values[{i}]"), format!("must be at least 2, got {p}")));
            }
        }
        for (i, g) in self.fuzz.gamma_values.iter().enumerate() {
            positive(&format!("fuzz.gamma_values[{i}]"), *g)?;
        }
        for (i, e) in self.fuzz.epsilons.iter().enumerate() {
            if !(*e >= 0.0) {
                return Err(err(&format!("fuzz.epsilons[{i}]"), format!("must be >= 0, got {e}")));
            }
        }
        if !(0.0..=1.0).contains(&self.fuzz.aligned_fraction) {
            return Err(err("fuzz.aligned_fraction", "must lie in [0, 1]"));
        }
        if !(self.barrier.p > 2.0) {
            return Err(err("barrier.p", "p must exceed 2 for evolution"));
        }
        positive("barrier.epsilon", self.barrier.epsilon)?;
        positive("barrier.sample_h", self.barrier.sample_h)?;
        if self.barrier.solve_h < 0.0 {
            return Err(err("barrier.solve_h", "must be >= 0"));
        }
        self.barrier_datum()?;
        positive("scaling.r", self.scaling.r)?;
        positive("scaling.rho", self.scaling.rho)?;
        for (i, p) in self.scaling.p_values.iter().enumerate() {
            if !(*p > 2.0) {
                return Err(err(&format!("scaling.p_values[{i}]"), format!("must exceed 2, got {p}")));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("spread", t.spread),
            ("band", t.band),
            ("residual", t.residual),
            ("algebra", t.algebra),
            ("holder_analytic", t.holder_analytic),
            ("holder_solver", t.holder_solver),
            ("barrier_defect", t.barrier_defect),
            ("comparison_slack", t.comparison_slack),
            ("refinement_ratio", t.refinement_ratio),
        ] {
            positive(&format!("tolerances.{name}"), v)?;
        }
        Ok(())
    }

    pub fn operator(&self) -> Result<SmoothOperatorF, ConfigError> {
        match &self.problem.operator {
            OperatorConfig::Trace => Ok(SmoothOperatorF::trace()),
            OperatorConfig::Bellman { matrices, scale } => {
                let mut ops = Vec::new();
                for (k, rows) in matrices.iter().enumerate() {
                    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
                    let m = SymMatrix::from_rows(&refs)
                        .map_err(|e| err(&format!("problem.operator.matrices[{k}]"), e.to_string()))?;
                    ops.push(m);
                }
                SmoothOperatorF::bellman_smooth(ops, *scale).map_err(|e| err("problem.operator", e.to_string()))
            }
        }
    }

    pub fn params(&self) -> Result<CoefficientParams, ConfigError> {
        let pr = &self.problem;
        let family = match pr.family {
            FamilyName::PLaplace => Family::PLaplace { p: pr.p },
            FamilyName::FullyNonlinear => Family::FullyNonlinear {
                gamma: pr.gamma,
                operator: self.operator()?,
            },
            FamilyName::GeneralQuasilinear => Family::GeneralQuasilinear { gamma: pr.gamma, p: pr.p },
        };
        CoefficientParams::new(family, pr.epsilon).map_err(|e| err("problem", e.to_string()))
    }

    /// The closed-form solution matching `[problem]`, if there is one.
    pub fn exact_solution(&self) -> Option<ExactSolution> {
        let pr = &self.problem;
        match (pr.family, &pr.operator) {
            (FamilyName::PLaplace, _) => ExactSolution::p_laplace(pr.dim, pr.p).ok(),
            (FamilyName::FullyNonlinear, OperatorConfig::Trace) => ExactSolution::fully_nonlinear(pr.dim, pr.gamma).ok(),
            _ => None,
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::cylinder(self.problem.dim, self.problem.extent, self.problem.h)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let params = self.params()?;
        let mut spec = match self.problem.data {
            DataKind::Exact => {
                let sol = self
                    .exact_solution()
                    .ok_or_else(|| err("problem.data", "this family has no closed-form solution"))?;
                ProblemSpec::with_data(params, self.domain(), move |x: &Vector, t| sol.value(x, t))
            }
            DataKind::Cosine => ProblemSpec::with_data(params, self.domain(), |x: &Vector, _| {
                let pi = std::f64::consts::PI;
                x.as_slice().iter().map(|c| (pi * c).cos()).product()
            }),
            DataKind::Zero => ProblemSpec::with_data(params, self.domain(), |_: &Vector, _| 0.0),
        };
        spec.gradient_cap = self.problem.gradient_cap;
        spec.dt = self.problem.dt;
        Ok(spec)
    }

    pub fn barrier_datum(&self) -> Result<QuadraticDatum, ConfigError> {
        let phi = &self.barrier.phi;
        let n = phi.linear.len();
        if !(1..=2).contains(&n) {
            return Err(err("barrier.phi.linear", format!("needs 1 or 2 entries, got {n}")));
        }
        let refs: Vec<&[f64]> = phi.hessian.iter().map(|r| r.as_slice()).collect();
        let hessian = SymMatrix::from_rows(&refs).map_err(|e| err("barrier.phi.hessian", e.to_string()))?;
        if hessian.dim() != n {
            return Err(err("barrier.phi.hessian", "dimension differs from barrier.phi.linear"));
        }
        Ok(QuadraticDatum {
            constant: phi.constant,
            linear: Vector::from_slice(&phi.linear),
            hessian,
            time_rate: phi.time_rate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
command = "solve"
[problem]
family = "p-laplace"
p = 3.0
epsilon = 0.05
h = 0.03125
"#;

    #[test]
    fn minimal_solve_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.command, Some(Command::Solve));
        assert_eq!(cfg.problem.dt, None);
        assert_eq!(cfg.problem.extent, 0.75);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn rejects_small_p_for_evolution() {
        let doc = MINIMAL.replace("p = 3.0", "p = 1.5");
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.path, "problem.p");
        assert!(e.message.contains("p must exceed 2 for evolution"));
    }

    #[test]
    fn unknown_key_reports_path() {
        let doc = format!("{MINIMAL}bogus = 1\n");
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.path, "problem.bogus");
        assert!(e.message.contains("unknown field"));
    }

    #[test]
    fn wrong_type_reports_path() {
        let e = parse_config("[fuzz]\nsamples = \"many\"\n").unwrap_err();
        assert_eq!(e.path, "fuzz.samples");
    }

    #[test]
    fn out_of_range_reports_path() {
        let e = parse_config("[sweep]\neps = [0.1, 0.2]\n").unwrap_err();
        assert_eq!(e.path, "sweep.eps");
        let e = parse_config("[tolerances]\nspread = -1.0\n").unwrap_err();
        assert_eq!(e.path, "tolerances.spread");
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        let again = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn command_conflict() {
        let e = parse_for_command(MINIMAL, Command::JetFuzz).unwrap_err();
        assert_eq!(e.path, "command");
        let cfg = parse_for_command("", Command::JetFuzz).unwrap();
        assert_eq!(cfg.command, Some(Command::JetFuzz));
    }

    #[test]
    fn bellman_operator_parses() {
        let doc = r#"
[problem]
family = "fully-nonlinear"
gamma = 1.0
[problem.operator]
kind = "bellman"
matrices = [[[1.0, 0.0], [0.0, 2.0]], [[2.0, 0.0], [0.0, 1.0]]]
scale = 0.1
"#;
        let cfg = parse_config(doc).unwrap();
        assert!(cfg.params().is_ok());
        assert!(cfg.exact_solution().is_none());
        assert_eq!(parse_config(&serialize_config(&cfg)).unwrap(), cfg);
    }
}
