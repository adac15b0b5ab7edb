//! Scenario runners. Each takes a [`ScenarioConfig`], runs its cells in the
//! current rayon pool and returns a [`ScenarioResult`] whose checks are the
//! scenario's assertions.

use lowrank::analysis::{
    nag_lazy_rate, rho_exact_line_search, rho_iht, rho_t, spectral_report, SpectralReport,
};
use lowrank::linalg::DenseMatrix;
use lowrank::operators::{generate_instance, random_init, spectral_init, MeasurementKind, ProblemInstance};
use lowrank::solvers::{
    self, Algorithm, IterationRecord, IterationTrace, Momentum, SolverConfig, Stepsize, TerminalStatus,
};
use rayon::prelude::*;

use crate::config::{AlgorithmEntry, ConfigError, InitConfig, InstanceConfig, ScenarioConfig, ScenarioKind, StopRule};
use crate::output::{OutputError, ScenarioResult};
use crate::summary::TraceRun;

pub mod analyze;
pub mod compare;
pub mod init_study;
pub mod landscape;
pub mod oscillation;
pub mod phase;
pub mod quadratic;
pub mod radius;
pub mod runtime;
pub mod solve;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] lowrank::Error),
    #[error(transparent)]
    Output(#[from] OutputError),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;
pub type ScenarioOutcome = Result<ScenarioResult>;

/// Desk-scale rate-study instance: completion, 30×30, rank 2, 60% observed.
pub fn default_instance() -> InstanceConfig {
    InstanceConfig::completion(30, 2, 0.6)
}

pub fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}

/// Largest tangent dimension for which the spectral report is computed.
pub const ANALYSIS_MAX_TANGENT_DIM: usize = 1200;
/// Largest `n1 n2` for which a sensing report is computed.
pub const ANALYSIS_MAX_SENSING_ENTRIES: usize = 4096;

pub fn analysis_feasible(inst: &InstanceConfig) -> bool {
    let tangent = inst.r * (inst.n1 + inst.n2).saturating_sub(inst.r);
    tangent <= ANALYSIS_MAX_TANGENT_DIM
        && (inst.kind == MeasurementKind::Completion || inst.n1 * inst.n2 <= ANALYSIS_MAX_SENSING_ENTRIES)
}

pub fn run(kind: ScenarioKind, cfg: &ScenarioConfig) -> ScenarioOutcome {
    cfg.validate_for(kind)?;
    match kind {
        ScenarioKind::Quadratic => quadratic::run(cfg),
        ScenarioKind::Compare => compare::run(cfg),
        ScenarioKind::Oscillation => oscillation::run(cfg),
        ScenarioKind::Radius => radius::run(cfg),
        ScenarioKind::Landscape => landscape::run(cfg),
        ScenarioKind::InitStudy => init_study::run(cfg),
        ScenarioKind::Runtime => runtime::run(cfg),
        ScenarioKind::Phase => phase::run(cfg),
        ScenarioKind::Analyze => analyze::run(cfg),
        ScenarioKind::Solve => solve::run(cfg),
    }
}

/// A generated instance with its starting point and, when feasible, its
/// spectral report.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub instance: ProblemInstance,
    pub x0: DenseMatrix,
    pub report: Option<SpectralReport>,
}

/// Seed for the initialization noise, decorrelated from the instance seed.
pub fn init_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

pub fn initial_point(inst: &ProblemInstance, init: &InitConfig, seed: u64) -> lowrank::Result<DenseMatrix> {
    match *init {
        InitConfig::Spectral => spectral_init(inst),
        InitConfig::Random { sigma } => random_init(inst, sigma, init_seed(seed)),
    }
}

pub fn prepare(
    inst_cfg: &InstanceConfig,
    init: &InitConfig,
    seed: u64,
    with_analysis: bool,
) -> Result<Prepared> {
    let instance = generate_instance(&inst_cfg.spec(seed))?;
    let x0 = initial_point(&instance, init, seed)?;
    let report = if with_analysis && analysis_feasible(inst_cfg) {
        Some(spectral_report(instance.operator(), instance.ground_truth())?)
    } else {
        None
    };
    Ok(Prepared { seed, instance, x0, report })
}

/// Prepares every seed in parallel, keeping seed order.
pub fn prepare_all(
    inst_cfg: &InstanceConfig,
    init: &InitConfig,
    seeds: &[u64],
    with_analysis: bool,
) -> Result<Vec<Prepared>> {
    seeds.par_iter().map(|&s| prepare(inst_cfg, init, s, with_analysis)).collect()
}

/// Trace of a run that could not start.
pub fn failed_trace(inst: &ProblemInstance, algorithm: Algorithm, x0: &DenseMatrix, message: String) -> IterationTrace {
    let xstar = inst.ground_truth();
    IterationTrace {
        algorithm,
        records: vec![IterationRecord {
            t: 0,
            residual: (x0 - xstar.to_dense()).norm(),
            loss: f64::NAN,
            mu: 0.0,
            eta: 0.0,
            restart: false,
            wall_time_ns: 0,
        }],
        restart_tests: Vec::new(),
        status: TerminalStatus::Error { iteration: 0, message },
        sigma_r: xstar.sigma_min(),
    }
}

/// Runs a solver; a failure is recorded in the trace rather than returned.
pub fn run_config(prep: &Prepared, cfg: &SolverConfig) -> IterationTrace {
    solvers::run(&prep.instance, cfg, &prep.x0)
        .unwrap_or_else(|e| failed_trace(&prep.instance, cfg.algorithm, &prep.x0, e.to_string()))
}

pub fn entry_config(entry: &AlgorithmEntry, stop: &StopRule, prep: &Prepared) -> Result<SolverConfig> {
    let cfg = entry.solver_config(stop, prep.report.as_ref())?;
    cfg.validate().map_err(|e| ConfigError::new("algorithms", format!("{}: {e}", entry.label())))?;
    Ok(cfg)
}

pub fn run_entry(prep: &Prepared, entry: &AlgorithmEntry, stop: &StopRule) -> Result<TraceRun> {
    let cfg = entry_config(entry, stop, prep)?;
    let trace = run_config(prep, &cfg);
    let predicted_rate = prep.report.as_ref().and_then(|r| predicted_rate(&cfg, r, &trace));
    Ok(TraceRun { label: entry.label(), seed: prep.seed, trace, predicted_rate })
}

/// Runs every entry on every prepared instance, in parallel; the result is
/// ordered by seed, then by entry.
pub fn run_grid(
    preps: &[Prepared],
    entries: &[AlgorithmEntry],
    stop: &StopRule,
) -> Result<Vec<TraceRun>> {
    let cells: Vec<(&Prepared, &AlgorithmEntry)> =
        preps.iter().flat_map(|p| entries.iter().map(move |e| (p, e))).collect();
    cells.par_iter().map(|(p, e)| run_entry(p, e, stop)).collect()
}

/// Last nonzero stepsize of a trace.
pub fn last_stepsize(trace: &IterationTrace) -> Option<f64> {
    trace.records.iter().rev().map(|r| r.mu).find(|&m| m > 0.0)
}

/// Predicted asymptotic rate of a configured run, when the analysis
/// covers it.
pub fn predicted_rate(cfg: &SolverConfig, report: &SpectralReport, trace: &IterationTrace) -> Option<f64> {
    if !report.is_identifiable() {
        return None;
    }
    let momentum = match cfg.momentum {
        _ if !(cfg.algorithm.takes_momentum() || cfg.algorithm == Algorithm::NargRestart) => Momentum::Off,
        Momentum::Constant { q } if q >= 1.0 => Momentum::Off,
        m => m,
    };
    match (momentum, cfg.stepsize) {
        (Momentum::Restart, _) => Some(report.rho_opt),
        (Momentum::Constant { q }, Stepsize::Constant { mu }) => {
            let s = q.sqrt();
            Some(rho_t(report, mu, (1.0 - s) / (1.0 + s)).rho)
        }
        (Momentum::Constant { q }, _) => ((q * report.kappa - 1.0).abs() < 1e-9).then_some(report.rho_opt),
        (Momentum::Lazy { d }, _) => {
            let t0 = trace.basin_entry()?.max(2);
            nag_lazy_rate(report, t0, trace.iterations(), d).ok()
        }
        (Momentum::Off, Stepsize::Constant { mu }) => Some(rho_iht(report, mu)),
        (Momentum::Off, Stepsize::ExactLineSearch) => rho_exact_line_search(report, last_stepsize(trace)?).ok(),
        (Momentum::Off, Stepsize::Niht { .. }) => None,
    }
}

pub fn seed_list(seeds: &[u64]) -> String {
    seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

/// `X★ + offset·σ_r·G/‖G‖_F` for a Gaussian `G` drawn from `seed`.
pub fn basin_start(inst: &ProblemInstance, offset: f64, seed: u64) -> DenseMatrix {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(init_seed(seed).wrapping_add(1));
    let xstar = inst.ground_truth();
    let (n1, n2) = xstar.shape();
    let g = DenseMatrix::from_fn(n1, n2, |_, _| StandardNormal.sample(&mut rng));
    let scale = offset * xstar.sigma_min() / g.norm();
    xstar.to_dense() + g * scale
}

/// Magnitude above which the two restart tests must agree in sign.
pub const RESTART_SIGN_FLOOR: f64 = 1e-10;

/// Restart tests of a run from basin entry on: how many had a magnitude
/// above [`RESTART_SIGN_FLOOR`] and how many of those disagreed in sign.
pub fn restart_sign_counts(trace: &IterationTrace) -> (usize, usize) {
    let Some(entry) = trace.basin_entry() else {
        return (0, 0);
    };
    let tests = trace
        .restart_tests
        .iter()
        .filter(|r| r.t >= entry && r.euclidean.abs().max(r.tangent.abs()) > RESTART_SIGN_FLOOR);
    tests.fold((0, 0), |(n, bad), r| (n + 1, bad + usize::from((r.euclidean > 0.0) != (r.tangent > 0.0))))
}
