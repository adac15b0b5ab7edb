//! Scenario configuration as read from JSON.
//!
//! Every section is optional; a missing section takes the desk-scale default
//! of the scenario being run. Unknown keys are rejected at every level.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lowrank::analysis::SpectralReport;
use lowrank::manifold::Retraction;
use lowrank::operators::{InstanceSpec, MeasurementKind, Sampling};
use lowrank::solvers::{Algorithm, Momentum, NihtVariant, SolverConfig, Stepsize};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Quadratic,
    Compare,
    Oscillation,
    Radius,
    Landscape,
    InitStudy,
    Runtime,
    Phase,
    Analyze,
    Solve,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 10] = [
        ScenarioKind::Quadratic,
        ScenarioKind::Compare,
        ScenarioKind::Oscillation,
        ScenarioKind::Radius,
        ScenarioKind::Landscape,
        ScenarioKind::InitStudy,
        ScenarioKind::Runtime,
        ScenarioKind::Phase,
        ScenarioKind::Analyze,
        ScenarioKind::Solve,
    ];

    /// Command-line spelling.
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Quadratic => "quadratic",
            ScenarioKind::Compare => "compare",
            ScenarioKind::Oscillation => "oscillation",
            ScenarioKind::Radius => "radius",
            ScenarioKind::Landscape => "landscape",
            ScenarioKind::InitStudy => "init-study",
            ScenarioKind::Runtime => "runtime",
            ScenarioKind::Phase => "phase",
            ScenarioKind::Analyze => "analyze",
            ScenarioKind::Solve => "solve",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('_', "-");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| ConfigError::new("scenario", format!("unknown scenario `{s}`")))
    }
}

/// Problem instance parameters. `sampling` is `{"rate": p}` for completion
/// and `{"count": m}` for sensing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub kind: MeasurementKind,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub sampling: Sampling,
    /// Condition number of `X★`; Gaussian factors when absent.
    pub condition: Option<f64>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self::completion(30, 2, 0.6)
    }
}

impl InstanceConfig {
    pub fn completion(n: usize, r: usize, p: f64) -> Self {
        Self { kind: MeasurementKind::Completion, n1: n, n2: n, r, sampling: Sampling::Rate(p), condition: None }
    }

    pub fn sensing(n: usize, r: usize, m: usize) -> Self {
        Self { kind: MeasurementKind::Sensing, n1: n, n2: n, r, sampling: Sampling::Count(m), condition: None }
    }

    pub fn spec(&self, seed: u64) -> InstanceSpec {
        InstanceSpec {
            kind: self.kind,
            n1: self.n1,
            n2: self.n2,
            r: self.r,
            sampling: self.sampling,
            seed,
            condition: self.condition,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(ConfigError::new("instance.n1", "matrix dimensions must be positive"));
        }
        if self.r == 0 || self.r > self.n1.min(self.n2) {
            return Err(ConfigError::new(
                "instance.r",
                format!("rank {} outside 1..={}", self.r, self.n1.min(self.n2)),
            ));
        }
        match (self.kind, self.sampling) {
            (MeasurementKind::Completion, Sampling::Rate(p)) if p > 0.0 && p <= 1.0 => {}
            (MeasurementKind::Completion, _) => {
                return Err(ConfigError::new("instance.sampling", "completion needs {\"rate\": p} with 0 < p <= 1"))
            }
            (MeasurementKind::Sensing, Sampling::Count(m)) if m > 0 => {}
            (MeasurementKind::Sensing, _) => {
                return Err(ConfigError::new("instance.sampling", "sensing needs {\"count\": m} with m >= 1"))
            }
        }
        if let Some(c) = self.condition {
            if !(c >= 1.0 && c.is_finite()) {
                return Err(ConfigError::new("instance.condition", "condition number must be >= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Spectral,
    /// Spectral start perturbed by Gaussian noise of this level.
    Random { sigma: f64 },
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Spectral
    }
}

/// Reference stepsize that `mu_relative` multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBase {
    /// `2 / (λmax + λmin)`.
    #[default]
    Dagger,
    /// `2 / λmax`.
    DoubleDagger,
    /// `4 / (λmin + 3λmax)`.
    Flat,
}

impl StepBase {
    pub fn value(&self, report: &SpectralReport) -> f64 {
        match self {
            StepBase::Dagger => report.mu_dagger,
            StepBase::DoubleDagger => report.mu_double_dagger,
            StepBase::Flat => report.mu_flat,
        }
    }
}

/// One algorithm in a scenario, with optional overrides of the scenario's
/// defaults. `mu_relative` sets a constant stepsize as a multiple of
/// `mu_base` (default `μ†`), `q_relative` a constant momentum `q` as a
/// multiple of `1/κ`; both need the spectral analysis of the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retraction: Option<Retraction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stepsize: Option<Stepsize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<Momentum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_relative: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_base: Option<StepBase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_relative: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tol_resid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tol_grad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_restart: Option<bool>,
}

impl AlgorithmEntry {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            label: None,
            retraction: None,
            stepsize: None,
            momentum: None,
            mu_relative: None,
            mu_base: None,
            q_relative: None,
            max_iters: None,
            stop_tol_resid: None,
            stop_tol_grad: None,
            warm_restart: None,
        }
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn with_retraction(mut self, retraction: Retraction) -> Self {
        self.retraction = Some(retraction);
        self
    }

    pub fn with_stepsize(mut self, stepsize: Stepsize) -> Self {
        self.stepsize = Some(stepsize);
        self
    }

    pub fn with_momentum(mut self, momentum: Momentum) -> Self {
        self.momentum = Some(momentum);
        self
    }

    pub fn with_mu_relative(mut self, factor: f64) -> Self {
        self.mu_relative = Some(factor);
        self
    }

    pub fn with_mu_base(mut self, base: StepBase) -> Self {
        self.mu_base = Some(base);
        self
    }

    pub fn with_q_relative(mut self, factor: f64) -> Self {
        self.q_relative = Some(factor);
        self
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut name = self.algorithm.name().to_string();
        if self.algorithm == Algorithm::Rgrad {
            name.push_str(match self.retraction.unwrap_or(Retraction::Orthographic) {
                Retraction::Projective => "-PROJ",
                Retraction::Orthographic => "-ORTH",
            });
        }
        if let Some(Stepsize::Niht { variant }) = self.stepsize {
            name = format!(
                "NIHT-{}",
                match variant {
                    NihtVariant::U => "U",
                    NihtVariant::V => "V",
                    NihtVariant::Uv => "UV",
                }
            );
        }
        name
    }

    pub fn needs_analysis(&self) -> bool {
        self.mu_relative.is_some() || self.q_relative.is_some()
    }

    /// Solver configuration with the scenario's stopping rule and, for the
    /// relative settings, the instance's spectral report.
    pub fn solver_config(
        &self,
        stop: &StopRule,
        analysis: Option<&SpectralReport>,
    ) -> Result<SolverConfig, ConfigError> {
        let mut cfg = SolverConfig::new(self.algorithm);
        if self.algorithm.takes_momentum() {
            cfg.momentum = Momentum::Lazy { d: 2 };
        }
        cfg.max_iters = stop.max_iters;
        cfg.stop_tol_resid = stop.stop_tol_resid;
        if let Some(r) = self.retraction {
            cfg.retraction = r;
        }
        if let Some(s) = self.stepsize {
            cfg.stepsize = s;
        }
        if let Some(m) = self.momentum {
            cfg.momentum = m;
        }
        if let Some(factor) = self.mu_relative {
            let report = analysis.ok_or_else(|| {
                ConfigError::new("algorithms.mu_relative", "needs the spectral analysis, which is infeasible here")
            })?;
            cfg.stepsize = Stepsize::Constant { mu: factor * self.mu_base.unwrap_or_default().value(report) };
        }
        if let Some(factor) = self.q_relative {
            let report = analysis.ok_or_else(|| {
                ConfigError::new("algorithms.q_relative", "needs the spectral analysis, which is infeasible here")
            })?;
            cfg.momentum = Momentum::Constant { q: (factor / report.kappa).min(1.0) };
        }
        if let Some(n) = self.max_iters {
            cfg.max_iters = n;
        }
        if let Some(t) = self.stop_tol_resid {
            cfg.stop_tol_resid = t;
        }
        if self.stop_tol_grad.is_some() {
            cfg.stop_tol_grad = self.stop_tol_grad;
        }
        if let Some(w) = self.warm_restart {
            cfg.warm_restart = w;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [("mu_relative", self.mu_relative), ("q_relative", self.q_relative)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigError::new(format!("algorithms.{name}"), "must be positive"));
                }
            }
        }
        if self.q_relative.is_some() && !matches!(self.algorithm, Algorithm::Nag | Algorithm::NagOneSvd | Algorithm::Narg) {
            return Err(ConfigError::new("algorithms.q_relative", "only momentum methods take q"));
        }
        if self.mu_base.is_some() && self.mu_relative.is_none() {
            return Err(ConfigError::new("algorithms.mu_base", "only meaningful with mu_relative"));
        }
        let stop = StopRule::default();
        let probe_report = SpectralReport::from_extremes(1.0, 0.5).expect("valid extremes");
        let probe = self.solver_config(&stop, Some(&probe_report))?;
        probe.validate().map_err(|e| ConfigError::new("algorithms", format!("{}: {e}", self.label())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRule {
    pub max_iters: usize,
    pub stop_tol_resid: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { max_iters: 3000, stop_tol_resid: RATE_STOP_TOL }
    }
}

/// Residual threshold for rate studies. Deep enough that the fitted window
/// sits in the asymptotic regime, well above the rounding floor.
pub const RATE_STOP_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticParams {
    /// Symmetric positive definite Hessian, row by row.
    pub q: [[f64; 2]; 2],
    /// Number of evenly spaced angles in `[0, 2π)`.
    pub thetas: usize,
    pub max_iters: usize,
    /// Stop once `‖x_t‖ ≤ tol·‖x_0‖`.
    pub tol: f64,
    pub rate_tolerance: f64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        Self { q: [[10.0, 1.0], [1.0, 1.0]], thetas: 32, max_iters: 200, tol: 1e-12, rate_tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareParams {
    pub stop: StopRule,
    pub rate_tolerance: f64,
    /// Also run Euclidean/Riemannian pairs from a common start inside the
    /// basin and compare their rates.
    pub equivalence: bool,
    pub equivalence_tolerance: f64,
    /// Distance of the basin start from `X★`, as a multiple of `σ_r(X★)`.
    pub basin_offset: f64,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            stop: StopRule::default(),
            rate_tolerance: 5e-2,
            equivalence: true,
            equivalence_tolerance: 5e-3,
            basin_offset: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillationParams {
    /// Momentum method swept; `NARG` or `NAG`.
    pub algorithm: Algorithm,
    /// Multiples of `q★ = 1/κ`; `q = 1` is always added.
    pub q_factors: Vec<f64>,
    pub d_values: Vec<usize>,
    pub stop: StopRule,
    pub rate_tolerance: f64,
}

impl Default for OscillationParams {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Narg,
            q_factors: vec![0.25, 1.0, 4.0],
            d_values: vec![2, 5, 10, 20],
            stop: StopRule::default(),
            rate_tolerance: 5e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusParams {
    /// Points of the stepsize sweep over `(0, μ‡]`.
    pub mu_points: usize,
    /// Side of the `(μ, η)` grid.
    pub grid: usize,
    /// Grid index of `μ♭` and `η♭`; node `k` sits at `(k+1)/(anchor+1)` of
    /// the optimal value.
    pub anchor: usize,
    /// Number of grid points also checked by the full dense eigensolver.
    pub dense_checks: usize,
    pub tolerance: f64,
}

impl Default for RadiusParams {
    fn default() -> Self {
        Self { mu_points: 30, grid: 20, anchor: 13, dense_checks: 5, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeParams {
    pub mu_points: usize,
    pub eta_points: usize,
    /// Upper end of the stepsize axis as a multiple of `μ‡`.
    pub mu_span: f64,
}

impl Default for LandscapeParams {
    fn default() -> Self {
        Self { mu_points: 41, eta_points: 41, mu_span: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitStudyParams {
    pub sigmas: Vec<f64>,
    pub stop: StopRule,
    pub rate_tolerance: f64,
}

impl Default for InitStudyParams {
    fn default() -> Self {
        Self { sigmas: vec![0.0, 0.5, 1.0, 2.0, 4.0], stop: StopRule::default(), rate_tolerance: 5e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeCell {
    pub n: usize,
    pub r: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeParams {
    pub cells: Vec<RuntimeCell>,
    pub stop: StopRule,
    /// Wall-clock budget per cell; a cell that exceeds it is incomplete.
    pub cell_timeout_secs: f64,
    /// Relative spread allowed between cells of equal `(r/n, p)`.
    pub size_tolerance: f64,
    /// Sizes for the per-iteration cost regression; empty to skip it.
    pub complexity_sizes: Vec<usize>,
    pub complexity_rank: usize,
    pub complexity_sampling: f64,
    pub complexity_steps: usize,
    pub rgrad_max_exponent: f64,
    pub grad_min_exponent: f64,
}

impl Default for RuntimeParams {
    fn default() -> Self {
        Self {
            // r in {0.05n, 0.1n} and p in {0.4, 0.6} at two sizes.
            cells: [100, 200]
                .into_iter()
                .flat_map(|n| {
                    [n / 20, n / 10].into_iter().flat_map(move |r| [0.4, 0.6].map(|p| RuntimeCell { n, r, p }))
                })
                .collect(),
            stop: StopRule { max_iters: 2000, stop_tol_resid: 1e-8 },
            cell_timeout_secs: 120.0,
            size_tolerance: 0.25,
            complexity_sizes: vec![100, 200, 400, 800],
            complexity_rank: 5,
            complexity_sampling: 0.3,
            complexity_steps: 5,
            rgrad_max_exponent: 2.3,
            grad_min_exponent: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseParams {
    pub n: usize,
    pub ranks: Vec<usize>,
    /// Entry-observation rates for completion, measurement counts for
    /// sensing.
    pub samplings: Vec<f64>,
    pub trials: usize,
    pub success_threshold: f64,
    pub stop: StopRule,
    /// Write one trace file per run (thousands of files at full size).
    pub keep_traces: bool,
}

impl Default for PhaseParams {
    fn default() -> Self {
        Self {
            n: 20,
            ranks: (1..=8).collect(),
            samplings: vec![0.15, 0.25, 0.35, 0.45, 0.55, 0.7, 0.85, 1.0],
            trials: 20,
            success_threshold: 1e-3,
            stop: StopRule { max_iters: 500, stop_tol_resid: 1e-6 },
            keep_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub stop: StopRule,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Must match the subcommand when given.
    pub scenario: Option<ScenarioKind>,
    pub instance: Option<InstanceConfig>,
    pub seeds: Option<Vec<u64>>,
    pub algorithms: Option<Vec<AlgorithmEntry>>,
    pub init: InitConfig,
    pub output_dir: Option<PathBuf>,
    pub quadratic: QuadraticParams,
    pub compare: CompareParams,
    pub oscillation: OscillationParams,
    pub radius: RadiusParams,
    pub landscape: LandscapeParams,
    pub init_study: InitStudyParams,
    pub runtime: RuntimeParams,
    pub phase: PhaseParams,
    pub solve: SolveParams,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path.is_empty() || path == "." { "config".to_string() } else { path };
            ConfigError::new(field, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn instance_or(&self, default: InstanceConfig) -> InstanceConfig {
        self.instance.clone().unwrap_or(default)
    }

    pub fn seeds_or(&self, default: &[u64]) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn algorithms_or(&self, default: Vec<AlgorithmEntry>) -> Vec<AlgorithmEntry> {
        self.algorithms.clone().unwrap_or(default)
    }

    /// Checks that do not depend on scenario defaults.
    pub fn validate_for(&self, kind: ScenarioKind) -> Result<(), ConfigError> {
        if let Some(k) = self.scenario {
            if k != kind {
                return Err(ConfigError::new("scenario", format!("config is for `{k}`, command is `{kind}`")));
            }
        }
        if let Some(inst) = &self.instance {
            inst.validate()?;
        }
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                return Err(ConfigError::new("seeds", "seed list must be nonempty"));
            }
        }
        if let Some(algs) = &self.algorithms {
            if algs.is_empty() {
                return Err(ConfigError::new("algorithms", "algorithm list must be nonempty"));
            }
            for a in algs {
                a.validate()?;
            }
        }
        if let InitConfig::Random { sigma } = self.init {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(ConfigError::new("init.sigma", "noise level must be finite and nonnegative"));
            }
        }
        match kind {
            ScenarioKind::Quadratic => self.quadratic.validate(),
            ScenarioKind::Oscillation => {
                let o = &self.oscillation;
                if !matches!(o.algorithm, Algorithm::Nag | Algorithm::Narg) {
                    return Err(ConfigError::new("oscillation.algorithm", "must be NAG or NARG"));
                }
                if o.q_factors.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
                    return Err(ConfigError::new("oscillation.q_factors", "factors must be positive"));
                }
                if o.q_factors.is_empty() || o.d_values.is_empty() {
                    return Err(ConfigError::new("oscillation", "q and d sweeps must be nonempty"));
                }
                Ok(())
            }
            ScenarioKind::Radius => {
                let r = &self.radius;
                if r.mu_points < 2 || r.grid < 3 || r.anchor + 1 >= r.grid {
                    return Err(ConfigError::new("radius", "need mu_points >= 2, grid >= 3 and anchor < grid - 1"));
                }
                Ok(())
            }
            ScenarioKind::Landscape => {
                let l = &self.landscape;
                if l.mu_points < 2 || l.eta_points < 2 || !(l.mu_span > 0.0) {
                    return Err(ConfigError::new("landscape", "need at least two points per axis and mu_span > 0"));
                }
                Ok(())
            }
            ScenarioKind::InitStudy => {
                if self.init_study.sigmas.is_empty() {
                    return Err(ConfigError::new("init_study.sigmas", "noise list must be nonempty"));
                }
                if self.init_study.sigmas.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
                    return Err(ConfigError::new("init_study.sigmas", "noise levels must be nonnegative"));
                }
                Ok(())
            }
            ScenarioKind::Runtime => {
                let rt = &self.runtime;
                if rt.cells.is_empty() {
                    return Err(ConfigError::new("runtime.cells", "grid must be nonempty"));
                }
                for c in &rt.cells {
                    if c.n > 1000 || c.r == 0 || c.r > c.n || !(c.p > 0.0 && c.p <= 1.0) {
                        return Err(ConfigError::new(
                            "runtime.cells",
                            format!("cell {c:?} outside n <= 1000, 1 <= r <= n, 0 < p <= 1"),
                        ));
                    }
                }
                if rt.complexity_sizes.iter().any(|&n| n < rt.complexity_rank || n > 1000) {
                    return Err(ConfigError::new("runtime.complexity_sizes", "sizes must lie in rank..=1000"));
                }
                if !rt.complexity_sizes.is_empty() && rt.complexity_sizes.len() < 2 {
                    return Err(ConfigError::new("runtime.complexity_sizes", "need at least two sizes"));
                }
                Ok(())
            }
            ScenarioKind::Phase => {
                let p = &self.phase;
                if p.ranks.is_empty() || p.samplings.is_empty() || p.trials == 0 {
                    return Err(ConfigError::new("phase", "ranks, samplings and trials must be nonempty"));
                }
                if p.ranks.iter().any(|&r| r == 0 || r > p.n) {
                    return Err(ConfigError::new("phase.ranks", format!("ranks must lie in 1..={}", p.n)));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl QuadraticParams {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.thetas < 8 {
            return Err(ConfigError::new("quadratic.thetas", "theta grid needs at least 8 points"));
        }
        let [[a, b], [c, d]] = self.q;
        if b != c || !(a > 0.0) || !(a * d - b * c > 0.0) {
            return Err(ConfigError::new("quadratic.q", "matrix must be symmetric positive definite"));
        }
        if !(self.tol > 0.0) {
            return Err(ConfigError::new("quadratic.tol", "tolerance must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_is_named() {
        let err = ScenarioConfig::from_json(r#"{"instance": {"n1": 10, "bogus": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        assert!(err.field.starts_with("instance"), "{}", err.field);
    }

    #[test]
    fn wrong_type_reports_its_path() {
        let err = ScenarioConfig::from_json(r#"{"radius": {"grid": "big"}}"#).unwrap_err();
        assert_eq!(err.field, "radius.grid");
    }

    #[test]
    fn algorithm_entry_round_trips() {
        let json = r#"{"algorithms": [{"algorithm": "NAG", "momentum": {"rule": "lazy", "d": 5}},
                                       {"algorithm": "IHT", "mu_relative": 1.0}]}"#;
        let cfg = ScenarioConfig::from_json(json).unwrap();
        let algs = cfg.algorithms.unwrap();
        let nag = algs[0].solver_config(&StopRule::default(), None).unwrap();
        assert_eq!(nag.momentum, Momentum::Lazy { d: 5 });
        let report = SpectralReport::from_extremes(1.5, 1.0).unwrap();
        let iht = algs[1].solver_config(&StopRule::default(), Some(&report)).unwrap();
        assert_eq!(iht.stepsize, Stepsize::Constant { mu: 0.8 });
        let dd = AlgorithmEntry::new(Algorithm::Iht).with_mu_relative(0.5).with_mu_base(StepBase::DoubleDagger);
        let cfg = dd.solver_config(&StopRule::default(), Some(&report)).unwrap();
        assert_eq!(cfg.stepsize, Stepsize::Constant { mu: 0.5 * 2.0 / 1.5 });
        assert!(algs[1].solver_config(&StopRule::default(), None).is_err());
    }

    #[test]
    fn momentum_defaults_to_lazy_two() {
        let cfg = AlgorithmEntry::new(Algorithm::Narg).solver_config(&StopRule::default(), None).unwrap();
        assert_eq!(cfg.momentum, Momentum::Lazy { d: 2 });
        let cfg = AlgorithmEntry::new(Algorithm::NargRestart).solver_config(&StopRule::default(), None).unwrap();
        assert_eq!(cfg.momentum, Momentum::Restart);
    }

    #[test]
    fn validation_names_fields() {
        let cfg = ScenarioConfig::from_json(r#"{"instance": {"n1": 5, "n2": 5, "r": 9}}"#).unwrap();
        assert_eq!(cfg.validate_for(ScenarioKind::Compare).unwrap_err().field, "instance.r");
        let cfg = ScenarioConfig::from_json(r#"{"quadratic": {"thetas": 4}}"#).unwrap();
        assert_eq!(cfg.validate_for(ScenarioKind::Quadratic).unwrap_err().field, "quadratic.thetas");
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "phase"}"#).unwrap();
        assert_eq!(cfg.validate_for(ScenarioKind::Radius).unwrap_err().field, "scenario");
        let cfg = ScenarioConfig::from_json(r#"{"seeds": []}"#).unwrap();
        assert_eq!(cfg.validate_for(ScenarioKind::Compare).unwrap_err().field, "seeds");
        let cfg = ScenarioConfig::from_json(r#"{"algorithms": [{"algorithm": "NARG", "retraction": "projective"}]}"#).unwrap();
        assert_eq!(cfg.validate_for(ScenarioKind::Compare).unwrap_err().field, "algorithms");
    }

    #[test]
    fn scenario_names_parse() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert_eq!("init_study".parse::<ScenarioKind>().unwrap(), ScenarioKind::InitStudy);
        assert!("nope".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(AlgorithmEntry::new(Algorithm::Rgrad).label(), "RGRAD-ORTH");
        assert_eq!(
            AlgorithmEntry::new(Algorithm::Rgrad).with_retraction(Retraction::Projective).label(),
            "RGRAD-PROJ"
        );
        assert_eq!(
            AlgorithmEntry::new(Algorithm::Iht).with_stepsize(Stepsize::Niht { variant: NihtVariant::U }).label(),
            "NIHT-U"
        );
        assert_eq!(AlgorithmEntry::new(Algorithm::NargRestart).label(), "NARG_RESTART");
    }
}
