//! Scenario files: TOML, versioned by `spec_version`.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use continuum_grasp::contact::ContactState;
use continuum_grasp::curves::{BoundaryCurve, RadiusProfile, Shape, DEFAULT_SAMPLES};
use continuum_grasp::feedback::{FeedbackGains, Mu2};
use continuum_grasp::pmp::{InitialGuess, Method, OcpSpec, SolverConfig};
use continuum_grasp::profile::Profile;
use continuum_grasp::quality::{ArmConfig, Disc, Metric, QualityConfig, SearchConfig};
use continuum_grasp::Vec2;
use serde::Deserialize;

pub const SPEC_VERSION: i64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("missing key `spec_version`")]
    MissingVersion,
    #[error("unsupported spec_version {0}, this build reads version {SPEC_VERSION}")]
    Version(i64),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] continuum_grasp::Error),
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { key, reason: reason.into() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spec_version: i64,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `out/<name>` when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub object: ObjectSpec,
    #[serde(default)]
    pub arm: ArmSpec,
    pub task: TaskSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectSpec {
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Ellipse {
        semi_major: f64,
        semi_minor: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "default_samples")]
        samples: usize,
    },
    DeformedCircle {
        radius: f64,
        amplitude: f64,
        mode: u32,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

/// Largest accepted `object.samples`.
pub const MAX_SAMPLES: usize = 1 << 20;

impl ObjectSpec {
    pub fn build(&self) -> Result<BoundaryCurve, ScenarioError> {
        let c = |p: [f64; 2]| Vec2::new(p[0], p[1]);
        let samples = match *self {
            ObjectSpec::Circle { samples, .. }
            | ObjectSpec::Ellipse { samples, .. }
            | ObjectSpec::DeformedCircle { samples, .. } => samples,
        };
        if samples > MAX_SAMPLES {
            return Err(ScenarioError::Invalid { key: "object.samples", reason: format!("at most {MAX_SAMPLES}") });
        }
        let curve = match *self {
            ObjectSpec::Circle { radius, center, samples } => BoundaryCurve::circle(radius, c(center), samples)?,
            ObjectSpec::Ellipse { semi_major, semi_minor, center, samples } => {
                BoundaryCurve::ellipse(semi_major, semi_minor, c(center), samples)?
            }
            ObjectSpec::DeformedCircle { radius, amplitude, mode, center, samples } => {
                BoundaryCurve::deformed_circle(radius, amplitude, mode, c(center), samples)?
            }
        };
        Ok(curve)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    /// Absolute arm length.
    pub length: Option<f64>,
    /// Arm length as a fraction of the object perimeter.
    pub length_fraction: Option<f64>,
    pub radius: Option<RadiusSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusSpec {
    pub base: f64,
    pub tip: f64,
}

impl ArmSpec {
    fn length(&self, perimeter: f64, default_fraction: f64) -> Result<f64, ScenarioError> {
        let l = match (self.length, self.length_fraction) {
            (Some(_), Some(_)) => return Err(invalid("arm", "set either `length` or `length_fraction`, not both")),
            (Some(l), None) => l,
            (None, Some(f)) => f * perimeter,
            (None, None) => default_fraction * perimeter,
        };
        if !(l > 0.0 && l.is_finite()) {
            return Err(invalid("arm.length", format!("must be positive, got {l}")));
        }
        Ok(l)
    }

    fn radius_or_taper(&self, length: f64) -> Result<RadiusProfile, ScenarioError> {
        match self.radius {
            Some(r) => Ok(RadiusProfile::new(r.base, r.tip)?),
            None => Ok(RadiusProfile::standard_taper(length)),
        }
    }
}

/// Scalar target profile over the arm.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    Linear {
        start: f64,
        end: f64,
    },
    /// Linear, with endpoints given as fractions of the arm length.
    Taper {
        start_fraction: f64,
        end_fraction: f64,
    },
}

impl ProfileSpec {
    pub fn resolve(&self, length: f64) -> Profile {
        match *self {
            ProfileSpec::Constant { value } => Profile::Constant(value),
            ProfileSpec::Linear { start, end } => Profile::Linear { start, end },
            ProfileSpec::Taper { start_fraction, end_fraction } => {
                Profile::Linear { start: start_fraction * length, end: end_fraction * length }
            }
        }
    }
}

fn default_rho_d() -> ProfileSpec {
    ProfileSpec::Taper { start_fraction: 1.0 / 20.0, end_fraction: 1.0 / 200.0 }
}

fn default_alpha_d() -> ProfileSpec {
    ProfileSpec::Constant { value: FRAC_PI_2 }
}

/// Overrides applied on top of a task's default solver settings.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: Option<Method>,
    pub eta: Option<f64>,
    pub adapt_every: Option<usize>,
    pub steps: Option<usize>,
    pub max_iterations: Option<usize>,
    pub gradient_tol: Option<f64>,
    pub relative_cost_tol: Option<f64>,
    pub cost_window: Option<usize>,
    pub barrier_weight: Option<f64>,
    pub memory: Option<usize>,
    pub max_step: Option<f64>,
    pub initial_guess: Option<InitialGuess>,
    pub feedback_restart: Option<bool>,
}

impl SolverSpec {
    pub fn apply(&self, base: SolverConfig) -> SolverConfig {
        let b = base;
        SolverConfig {
            method: self.method.unwrap_or(b.method),
            eta: self.eta.unwrap_or(b.eta),
            adapt_every: self.adapt_every.unwrap_or(b.adapt_every),
            steps: self.steps.unwrap_or(b.steps),
            max_iterations: self.max_iterations.unwrap_or(b.max_iterations),
            gradient_tol: self.gradient_tol.unwrap_or(b.gradient_tol),
            relative_cost_tol: self.relative_cost_tol.unwrap_or(b.relative_cost_tol),
            cost_window: self.cost_window.unwrap_or(b.cost_window),
            barrier_weight: self.barrier_weight.unwrap_or(b.barrier_weight),
            memory: self.memory.unwrap_or(b.memory),
            max_step: self.max_step.unwrap_or(b.max_step),
            initial_guess: self.initial_guess.clone().unwrap_or(b.initial_guess),
            feedback_restart: self.feedback_restart.unwrap_or(b.feedback_restart),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    OptimalGrasp(GraspTask),
    QualityMap(MapTask),
    MaximizeQuality(MaximizeTask),
    FeedbackRun(FeedbackTask),
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::OptimalGrasp(_) => TaskKind::OptimalGrasp,
            TaskSpec::QualityMap(_) => TaskKind::QualityMap,
            TaskSpec::MaximizeQuality(_) => TaskKind::MaximizeQuality,
            TaskSpec::FeedbackRun(_) => TaskKind::FeedbackRun,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    OptimalGrasp,
    QualityMap,
    MaximizeQuality,
    FeedbackRun,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::OptimalGrasp => "optimal_grasp",
            TaskKind::QualityMap => "quality_map",
            TaskKind::MaximizeQuality => "maximize_quality",
            TaskKind::FeedbackRun => "feedback_run",
        }
    }

    /// Subcommand that runs this task.
    pub fn subcommand(self) -> &'static str {
        match self {
            TaskKind::OptimalGrasp => "solve",
            TaskKind::QualityMap => "quality-map",
            TaskKind::MaximizeQuality => "maximize",
            TaskKind::FeedbackRun => "feedback",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspTask {
    pub chi: f64,
    pub rho0: f64,
    pub alpha0: f64,
    #[serde(default)]
    pub s_o0: f64,
    #[serde(default = "default_rho_d")]
    pub rho_d: ProfileSpec,
    #[serde(default = "default_alpha_d")]
    pub alpha_d: ProfileSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapTask {
    pub chi: f64,
    #[serde(default = "one")]
    pub rho_d: f64,
    #[serde(default = "half_pi")]
    pub alpha_d: f64,
    #[serde(default = "default_contact_tolerance")]
    pub contact_tolerance: f64,
    #[serde(default)]
    pub disc: Disc,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximizeTask {
    pub chi: f64,
    #[serde(default = "one")]
    pub rho_d: f64,
    #[serde(default = "half_pi")]
    pub alpha_d: f64,
    #[serde(default = "default_contact_tolerance")]
    pub contact_tolerance: f64,
    /// Coarse grid that seeds the search.
    #[serde(default)]
    pub disc: Disc,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub search: SearchSpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    pub starts: usize,
    pub max_iterations: u64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        let d = SearchConfig::default();
        SearchSpec { starts: d.starts, max_iterations: d.max_iterations }
    }
}

fn one() -> f64 {
    1.0
}

fn half_pi() -> f64 {
    FRAC_PI_2
}

fn default_contact_tolerance() -> f64 {
    QualityConfig::default().contact_tolerance
}

fn all_metrics() -> Vec<String> {
    Metric::ALL.iter().map(|m| m.name().to_string()).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackTask {
    pub mu1: f64,
    pub mu2: Mu2Spec,
    pub rho0: f64,
    pub alpha0: f64,
    #[serde(default)]
    pub s_o0: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    SolverConfig::default().steps
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mu2Spec {
    Constant {
        value: f64,
    },
    /// Equilibrium at the local arm radius; needs a circle or an explicit radius.
    Adaptive {
        object_radius: Option<f64>,
    },
    QuasiStatic {
        rho_d: ProfileSpec,
    },
}

/// A scenario resolved against its object: everything a run needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub seed: u64,
    pub output: PathBuf,
    pub curve: BoundaryCurve,
    pub task: PreparedTask,
}

#[derive(Debug, Clone)]
pub enum PreparedTask {
    Grasp(GraspSetup),
    Map(QualityConfig),
    Maximize { cfg: QualityConfig, metrics: Vec<Metric>, search: SearchConfig },
    Feedback(FeedbackSetup),
}

impl PreparedTask {
    pub fn kind(&self) -> TaskKind {
        match self {
            PreparedTask::Grasp(_) => TaskKind::OptimalGrasp,
            PreparedTask::Map(_) => TaskKind::QualityMap,
            PreparedTask::Maximize { .. } => TaskKind::MaximizeQuality,
            PreparedTask::Feedback(_) => TaskKind::FeedbackRun,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraspSetup {
    pub length: f64,
    pub radius: RadiusProfile,
    pub rho_d: Profile,
    pub alpha_d: Profile,
    pub chi: f64,
    pub initial: ContactState,
    pub solver: SolverConfig,
}

impl GraspSetup {
    pub fn spec<'a>(&self, curve: &'a BoundaryCurve) -> OcpSpec<'a> {
        OcpSpec {
            boundary: curve,
            length: self.length,
            rho_d: self.rho_d,
            alpha_d: self.alpha_d,
            chi: self.chi,
            initial: self.initial,
            radius: self.radius,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeedbackSetup {
    pub length: f64,
    pub radius: RadiusProfile,
    pub gains: FeedbackGains,
    pub initial: ContactState,
    pub steps: usize,
}

/// Parses scenario text. Checks the version key before the schema so old or
/// future files fail with a clear message.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let table: toml::Table = text.parse()?;
    match table.get("spec_version") {
        None => return Err(ScenarioError::MissingVersion),
        Some(toml::Value::Integer(SPEC_VERSION)) => {}
        Some(toml::Value::Integer(v)) => return Err(ScenarioError::Version(*v)),
        Some(other) => return Err(invalid("spec_version", format!("expected an integer, got {other}"))),
    }
    Ok(toml::from_str(text)?)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text)
}

fn positive(key: &'static str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn parse_metric(name: &str) -> Result<Metric, ScenarioError> {
    Metric::ALL
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| invalid("task.metrics", format!("unknown metric `{name}`, expected Q1, Q2 or Q3")))
}

impl Scenario {
    /// Builds the object and resolves every rule against it. Does not solve.
    pub fn prepare(&self) -> Result<Prepared, ScenarioError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(invalid("name", "use ASCII letters, digits, '_' or '-'"));
        }
        let curve = self.object.build()?;
        let perimeter = curve.len();
        let task = match &self.task {
            TaskSpec::OptimalGrasp(t) => {
                positive("task.chi", t.chi)?;
                let length = self.arm.length(perimeter, 2.0 / 3.0)?;
                let setup = GraspSetup {
                    length,
                    radius: self.arm.radius_or_taper(length)?,
                    rho_d: t.rho_d.resolve(length),
                    alpha_d: t.alpha_d.resolve(length),
                    chi: t.chi,
                    initial: ContactState::new(t.rho0, t.alpha0, t.s_o0),
                    solver: t.solver.apply(SolverConfig::default()),
                };
                setup.spec(&curve).validate()?;
                setup.solver.validate()?;
                PreparedTask::Grasp(setup)
            }
            TaskSpec::QualityMap(t) => PreparedTask::Map(self.quality_config(
                perimeter,
                t.chi,
                t.rho_d,
                t.alpha_d,
                t.contact_tolerance,
                t.disc,
                &t.solver,
            )?),
            TaskSpec::MaximizeQuality(t) => {
                let cfg = self.quality_config(perimeter, t.chi, t.rho_d, t.alpha_d, t.contact_tolerance, t.disc, &t.solver)?;
                if t.metrics.is_empty() {
                    return Err(invalid("task.metrics", "list at least one metric"));
                }
                let metrics = t.metrics.iter().map(|m| parse_metric(m)).collect::<Result<Vec<_>, _>>()?;
                if t.search.starts == 0 {
                    return Err(invalid("task.search.starts", "must be at least 1"));
                }
                let search = SearchConfig { starts: t.search.starts, max_iterations: t.search.max_iterations, seed: self.seed };
                PreparedTask::Maximize { cfg, metrics, search }
            }
            TaskSpec::FeedbackRun(t) => {
                let length = self.arm.length(perimeter, 2.0 / 3.0)?;
                let radius = self.arm.radius_or_taper(length)?;
                let mu2 = match t.mu2 {
                    Mu2Spec::Constant { value } => Mu2::Constant(value),
                    Mu2Spec::Adaptive { object_radius } => {
                        let object_radius = match (object_radius, curve.shape()) {
                            (Some(r), _) => r,
                            (None, Shape::Circle { radius, .. }) => radius,
                            (None, _) => return Err(invalid("task.mu2.object_radius", "required unless the object is a circle")),
                        };
                        positive("task.mu2.object_radius", object_radius)?;
                        Mu2::Adaptive { radius, object_radius }
                    }
                    Mu2Spec::QuasiStatic { rho_d } => Mu2::QuasiStatic { rho_d: rho_d.resolve(length) },
                };
                let gains = FeedbackGains { mu1: t.mu1, mu2 };
                gains.validate()?;
                if t.steps < 2 {
                    return Err(invalid("task.steps", "must be at least 2"));
                }
                PreparedTask::Feedback(FeedbackSetup {
                    length,
                    radius,
                    gains,
                    initial: ContactState::new(t.rho0, t.alpha0, t.s_o0),
                    steps: t.steps,
                })
            }
        };
        let output = self.output.clone().unwrap_or_else(|| Path::new("out").join(&self.name));
        Ok(Prepared { name: self.name.clone(), seed: self.seed, output, curve, task })
    }

    #[allow(clippy::too_many_arguments)]
    fn quality_config(
        &self,
        perimeter: f64,
        chi: f64,
        rho_d: f64,
        alpha_d: f64,
        contact_tolerance: f64,
        disc: Disc,
        solver: &SolverSpec,
    ) -> Result<QualityConfig, ScenarioError> {
        positive("task.chi", chi)?;
        positive("task.rho_d", rho_d)?;
        if !(contact_tolerance >= 0.0) {
            return Err(invalid("task.contact_tolerance", "must be non-negative"));
        }
        let defaults = QualityConfig::default();
        let length = self.arm.length(perimeter, defaults.arm.length_fraction)?;
        let radius = match self.arm.radius {
            None => defaults.arm.radius,
            Some(r) if r.base == r.tip => r.base,
            Some(_) => return Err(invalid("arm.radius", "quality tasks need base == tip")),
        };
        positive("arm.radius", radius)?;
        let cfg = QualityConfig {
            disc,
            arm: ArmConfig { length_fraction: length / perimeter, radius, rho_d, alpha_d, chi },
            solver: solver.apply(defaults.solver),
            contact_tolerance,
        };
        cfg.disc.validate()?;
        cfg.solver.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRASP: &str = r#"
spec_version = 1
name = "t"

[object]
kind = "circle"
radius = 5.0

[arm]
length_fraction = 0.5

[task]
kind = "optimal_grasp"
chi = 10.0
rho0 = 5.0
alpha0 = 1.6

[task.solver]
steps = 400
"#;

    #[test]
    fn parses_and_prepares() {
        let sc = parse_scenario(GRASP).unwrap();
        let p = sc.prepare().unwrap();
        let PreparedTask::Grasp(g) = p.task else { panic!() };
        assert_eq!(g.solver.steps, 400);
        assert_eq!(g.solver.gradient_tol, SolverConfig::default().gradient_tol);
        assert!((g.length - 0.5 * p.curve.len()).abs() < 1e-12);
        assert_eq!(g.rho_d, Profile::Linear { start: g.length / 20.0, end: g.length / 200.0 });
        assert_eq!(p.output, Path::new("out/t"));
    }

    #[test]
    fn missing_chi_is_named() {
        let text = GRASP.replace("chi = 10.0\n", "");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("chi"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = GRASP.replace("rho0 = 5.0", "rho0 = 5.0\nrho_zero = 1.0");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("rho_zero"), "{err}");
        let text = GRASP.replace("radius = 5.0", "radius = 5.0\nwobble = 1");
        assert!(parse_scenario(&text).unwrap_err().to_string().contains("wobble"));
    }

    #[test]
    fn version_is_checked_first() {
        let err = parse_scenario(&GRASP.replace("spec_version = 1", "spec_version = 2")).unwrap_err();
        assert!(matches!(err, ScenarioError::Version(2)));
        let err = parse_scenario(&GRASP.replace("spec_version = 1\n", "")).unwrap_err();
        assert!(matches!(err, ScenarioError::MissingVersion));
    }

    #[test]
    fn semantic_checks() {
        let both = GRASP.replace("length_fraction = 0.5", "length_fraction = 0.5\nlength = 3.0");
        assert!(parse_scenario(&both).unwrap().prepare().is_err());
        let neg = GRASP.replace("chi = 10.0", "chi = -1.0");
        assert!(parse_scenario(&neg).unwrap().prepare().unwrap_err().to_string().contains("chi"));
        let bad = GRASP.replace("alpha0 = 1.6", "alpha0 = 4.0");
        assert!(parse_scenario(&bad).unwrap().prepare().is_err());
    }

    #[test]
    fn adaptive_gain_needs_a_radius() {
        let text = r#"
spec_version = 1
name = "f"
[object]
kind = "ellipse"
semi_major = 8.0
semi_minor = 4.0
[task]
kind = "feedback_run"
mu1 = 1.0
mu2 = { rule = "adaptive" }
rho0 = 2.0
alpha0 = 1.0
"#;
        let err = parse_scenario(text).unwrap().prepare().unwrap_err().to_string();
        assert!(err.contains("object_radius"), "{err}");
    }
}
