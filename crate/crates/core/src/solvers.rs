//! Iterative solvers and their per-iteration traces.
//!
//! All seven methods share one driver, [`run`]. Euclidean methods (IHT,
//! Grad, NAG and its one-SVD reordering) truncate a dense iterate with a full
//! SVD; Riemannian methods (RGrad, NARG, NARG+R) stay in factored form and
//! only touch `n × r` products.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{truncate_rank, DenseMatrix};
use crate::manifold::{
    embed, inverse_orthographic, retract, retract_orthographic, tangent_from_products, tangent_project,
    FixedRankPoint, Retraction, TangentVector,
};
use crate::operators::{ProblemInstance, SensingOperator};

/// Runs stop as diverged once the residual exceeds this multiple of the
/// starting residual.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
pub const DEFAULT_STOP_TOL: f64 = 1e-8;
/// Residual below which the warm-start restart fires, as a fraction of
/// `σ_r(X★)`.
pub const BASIN_FRACTION: f64 = 0.5;
pub const DEFAULT_RATE_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Iht,
    Grad,
    Nag,
    NagOneSvd,
    Rgrad,
    Narg,
    NargRestart,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Iht,
        Algorithm::Grad,
        Algorithm::Nag,
        Algorithm::NagOneSvd,
        Algorithm::Rgrad,
        Algorithm::Narg,
        Algorithm::NargRestart,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Iht => "IHT",
            Algorithm::Grad => "GRAD",
            Algorithm::Nag => "NAG",
            Algorithm::NagOneSvd => "NAG_ONE_SVD",
            Algorithm::Rgrad => "RGRAD",
            Algorithm::Narg => "NARG",
            Algorithm::NargRestart => "NARG_RESTART",
        }
    }

    pub fn is_riemannian(&self) -> bool {
        matches!(self, Algorithm::Rgrad | Algorithm::Narg | Algorithm::NargRestart)
    }

    /// Whether the configured momentum schedule is used.
    pub fn takes_momentum(&self) -> bool {
        matches!(self, Algorithm::Nag | Algorithm::NagOneSvd | Algorithm::Narg)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace(['-', '+'], "_");
        let key = if key == "NARG_R" { "NARG_RESTART".to_string() } else { key };
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NihtVariant {
    U,
    V,
    Uv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stepsize {
    Constant { mu: f64 },
    ExactLineSearch,
    /// Line search restricted to the leading singular subspaces of the
    /// current iterate.
    Niht { variant: NihtVariant },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Momentum {
    Off,
    /// `η_t = (t−1)/(t+d)`.
    Lazy { d: usize },
    /// `η_t = (1−√q)/(1+√q)`.
    Constant { q: f64 },
    /// `η_t = (τ−1)/(τ+2)`, `τ` reset by the restart test.
    Restart,
}

/// Momentum at iteration `t` with restart counter `tau`, clamped to `[0, 1]`.
pub fn momentum_schedule(kind: &Momentum, t: usize, tau: usize) -> f64 {
    let eta = match *kind {
        Momentum::Off => 0.0,
        Momentum::Lazy { d } => (t as f64 - 1.0) / (t + d) as f64,
        Momentum::Constant { q } => {
            let s = q.sqrt();
            (1.0 - s) / (1.0 + s)
        }
        Momentum::Restart => (tau as f64 - 1.0) / (tau as f64 + 2.0),
    };
    if eta.is_nan() {
        0.0
    } else {
        eta.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub retraction: Retraction,
    pub stepsize: Stepsize,
    pub momentum: Momentum,
    pub max_iters: usize,
    pub stop_tol_resid: f64,
    pub stop_tol_grad: Option<f64>,
    /// Restart once when the iterate first enters the basin.
    pub warm_restart: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Rgrad,
            retraction: Retraction::Orthographic,
            stepsize: Stepsize::ExactLineSearch,
            momentum: Momentum::Off,
            max_iters: 1000,
            stop_tol_resid: DEFAULT_STOP_TOL,
            stop_tol_grad: None,
            warm_restart: true,
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        let momentum = if algorithm == Algorithm::NargRestart { Momentum::Restart } else { Momentum::Off };
        Self { algorithm, momentum, ..Self::default() }
    }

    pub fn with_stepsize(mut self, stepsize: Stepsize) -> Self {
        self.stepsize = stepsize;
        self
    }

    pub fn with_momentum(mut self, momentum: Momentum) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_retraction(mut self, retraction: Retraction) -> Self {
        self.retraction = retraction;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol_resid = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Stepsize::Constant { mu } = self.stepsize {
            if !(mu > 0.0 && mu.is_finite()) {
                return invalid(format!("constant stepsize must be positive, got {mu}"));
            }
        }
        if let Momentum::Constant { q } = self.momentum {
            if !(q > 0.0 && q <= 1.0) {
                return invalid(format!("momentum q must lie in (0, 1], got {q}"));
            }
        }
        match (self.algorithm, self.momentum) {
            (Algorithm::NargRestart, Momentum::Lazy { .. } | Momentum::Constant { .. }) => {
                return invalid("NARG_RESTART sets its own momentum; use the restart rule")
            }
            (a, Momentum::Restart) if a != Algorithm::NargRestart => {
                return invalid(format!("the restart rule is only available for NARG_RESTART, not {a}"))
            }
            _ => {}
        }
        if matches!(self.algorithm, Algorithm::Narg | Algorithm::NargRestart)
            && self.retraction != Retraction::Orthographic
        {
            return invalid("NARG needs the orthographic retraction for its inverse");
        }
        if !(self.stop_tol_resid >= 0.0) {
            return invalid("stop_tol_resid must be nonnegative");
        }
        if let Some(g) = self.stop_tol_grad {
            if !(g >= 0.0) {
                return invalid("stop_tol_grad must be nonnegative");
            }
        }
        Ok(())
    }
}

fn measured_quotient(norm_sq: f64, measured: &DVector<f64>) -> Result<f64> {
    if !(norm_sq > 0.0) {
        return invalid("line search direction is zero");
    }
    let denom = measured.norm_squared();
    if !(denom > 0.0) {
        return Err(Error::UnmeasuredDirection);
    }
    Ok(norm_sq / denom)
}

/// `‖G‖_F² / ‖A(G)‖²`, the minimizer of the loss along `−G`.
pub fn exact_line_search(g: &DenseMatrix, op: &SensingOperator) -> Result<f64> {
    measured_quotient(g.norm_squared(), &op.apply(g)?)
}

fn tangent_line_search(t: &TangentVector, op: &SensingOperator) -> Result<f64> {
    measured_quotient(t.norm().powi(2), &op.apply_tangent(t))
}

/// NIHT stepsize from the Euclidean gradient and the iterate's subspaces.
fn niht_stepsize(variant: NihtVariant, g: &DenseMatrix, x: &FixedRankPoint, op: &SensingOperator) -> Result<f64> {
    let (u, v) = (x.u(), x.v());
    let dir = match variant {
        NihtVariant::U => u * (u.transpose() * g),
        NihtVariant::V => (g * v) * v.transpose(),
        NihtVariant::Uv => u * (u.transpose() * g * v) * v.transpose(),
    };
    exact_line_search(&dir, op)
}

fn residual_at(inst: &ProblemInstance, x: &FixedRankPoint) -> DVector<f64> {
    inst.operator().apply_point(x) - inst.observations()
}

fn euclidean_gradient(inst: &ProblemInstance, x: &FixedRankPoint) -> Result<DenseMatrix> {
    inst.operator().adjoint(&residual_at(inst, x))
}

/// The next iterate plus what the driver records about the step.
#[derive(Debug, Clone)]
struct Step {
    next: FixedRankPoint,
    mu: f64,
    grad_norm: f64,
}

fn dense_rule(rule: &Stepsize, g: &DenseMatrix, base: &FixedRankPoint, op: &SensingOperator) -> Result<f64> {
    match *rule {
        Stepsize::Constant { mu } => Ok(mu),
        Stepsize::ExactLineSearch => exact_line_search(g, op),
        Stepsize::Niht { variant } => niht_stepsize(variant, g, base, op),
    }
}

fn iht_step(inst: &ProblemInstance, x: &FixedRankPoint, rule: &Stepsize) -> Result<Step> {
    let g = euclidean_gradient(inst, x)?;
    let grad_norm = g.norm();
    if grad_norm == 0.0 {
        return Ok(Step { next: x.clone(), mu: 0.0, grad_norm });
    }
    let mu = dense_rule(rule, &g, x, inst.operator())?;
    let next = truncate_rank(&(x.to_dense() - g * mu), inst.rank())?;
    Ok(Step { next, mu, grad_norm })
}

/// One projected-gradient step from the dense matrix `y`, projecting the
/// gradient onto the tangent space at `base = P_r(y)`. Returns the dense
/// result before truncation.
fn projected_gradient_move(
    inst: &ProblemInstance,
    y: &DenseMatrix,
    base: &FixedRankPoint,
    rule: &Stepsize,
) -> Result<(DenseMatrix, f64, f64)> {
    let op = inst.operator();
    let g = op.adjoint(&(op.apply(y)? - inst.observations()))?;
    let pg = tangent_project(base, &g)?;
    let grad_norm = pg.norm();
    if grad_norm == 0.0 {
        return Ok((y.clone(), 0.0, 0.0));
    }
    let mu = match *rule {
        Stepsize::Constant { mu } => mu,
        Stepsize::ExactLineSearch => tangent_line_search(&pg, op)?,
        Stepsize::Niht { variant } => niht_stepsize(variant, &g, base, op)?,
    };
    Ok((y - embed(&pg) * mu, mu, grad_norm))
}

fn nag_step(inst: &ProblemInstance, x: &FixedRankPoint, x_prev: &FixedRankPoint, eta: f64, rule: &Stepsize) -> Result<Step> {
    let xd = x.to_dense();
    let (y, base) = if eta == 0.0 {
        (xd, x.clone())
    } else {
        let y = &xd + (&xd - x_prev.to_dense()) * eta;
        let base = truncate_rank(&y, inst.rank())?;
        (y, base)
    };
    let (moved, mu, grad_norm) = projected_gradient_move(inst, &y, &base, rule)?;
    let next = if grad_norm == 0.0 && eta == 0.0 { x.clone() } else { truncate_rank(&moved, inst.rank())? };
    Ok(Step { next, mu, grad_norm })
}

/// Riemannian gradient at `x` and the residual `A(x) − y` it came from.
fn riemannian_gradient_at(inst: &ProblemInstance, x: &FixedRankPoint) -> Result<(TangentVector, DVector<f64>)> {
    let res = residual_at(inst, x);
    let (gv, gtu) = inst.operator().adjoint_products(&res, x.u(), x.v())?;
    Ok((tangent_from_products(x, gv, gtu)?, res))
}

struct RiemannianStep {
    step: Step,
    grad: TangentVector,
    residual: DVector<f64>,
}

fn rgrad_step(inst: &ProblemInstance, x: &FixedRankPoint, kind: Retraction, rule: &Stepsize) -> Result<RiemannianStep> {
    let (grad, residual) = riemannian_gradient_at(inst, x)?;
    let grad_norm = grad.norm();
    if grad_norm == 0.0 {
        let step = Step { next: x.clone(), mu: 0.0, grad_norm };
        return Ok(RiemannianStep { step, grad, residual });
    }
    let op = inst.operator();
    let mu = match *rule {
        Stepsize::Constant { mu } => mu,
        Stepsize::ExactLineSearch => tangent_line_search(&grad, op)?,
        Stepsize::Niht { variant } => niht_stepsize(variant, &op.adjoint(&residual)?, x, op)?,
    };
    let next = retract(kind, x, &grad.scaled(-mu))?;
    Ok(RiemannianStep { step: Step { next, mu, grad_norm }, grad, residual })
}

/// `R_X(−η · inv R_X(X_prev))`, short-circuited to `X` when there is nothing
/// to extrapolate.
fn riemannian_extrapolate(x: &FixedRankPoint, x_prev: &FixedRankPoint, eta: f64) -> Result<FixedRankPoint> {
    if eta == 0.0 || x == x_prev {
        return Ok(x.clone());
    }
    let back = inverse_orthographic(x, x_prev)?;
    retract_orthographic(x, &back.scaled(-eta))
}

struct MomentumStep {
    step: Step,
    y: FixedRankPoint,
    grad_y: TangentVector,
    residual_y: DVector<f64>,
}

fn narg_step(inst: &ProblemInstance, x: &FixedRankPoint, x_prev: &FixedRankPoint, eta: f64, rule: &Stepsize) -> Result<MomentumStep> {
    let y = riemannian_extrapolate(x, x_prev, eta)?;
    let RiemannianStep { step, grad, residual } = rgrad_step(inst, &y, Retraction::Orthographic, rule)?;
    Ok(MomentumStep { step, y, grad_y: grad, residual_y: residual })
}

/// `P_r(X − μ ∇f(X))`.
pub fn step_iht(x: &DenseMatrix, inst: &ProblemInstance, mu: f64) -> Result<FixedRankPoint> {
    if !(mu > 0.0) {
        return invalid("stepsize must be positive");
    }
    let op = inst.operator();
    let g = op.adjoint(&(op.apply(x)? - inst.observations()))?;
    truncate_rank(&(x - g * mu), inst.rank())
}

/// Projected-gradient step with exact line search, then truncation.
pub fn step_grad(x: &FixedRankPoint, inst: &ProblemInstance) -> Result<FixedRankPoint> {
    nag_step(inst, x, x, 0.0, &Stepsize::ExactLineSearch).map(|s| s.next)
}

/// Euclidean Nesterov step with exact line search.
pub fn step_nag(x: &FixedRankPoint, x_prev: &FixedRankPoint, inst: &ProblemInstance, eta: f64) -> Result<FixedRankPoint> {
    check_eta(eta)?;
    nag_step(inst, x, x_prev, eta, &Stepsize::ExactLineSearch).map(|s| s.next)
}

/// Riemannian gradient step with exact line search.
pub fn step_rgrad(x: &FixedRankPoint, inst: &ProblemInstance, retraction: Retraction) -> Result<FixedRankPoint> {
    rgrad_step(inst, x, retraction, &Stepsize::ExactLineSearch).map(|s| s.step.next)
}

/// Riemannian Nesterov step with exact line search; returns `(Y_t, X_{t+1})`.
pub fn step_narg(
    x: &FixedRankPoint,
    x_prev: &FixedRankPoint,
    inst: &ProblemInstance,
    eta: f64,
) -> Result<(FixedRankPoint, FixedRankPoint)> {
    check_eta(eta)?;
    narg_step(inst, x, x_prev, eta, &Stepsize::ExactLineSearch).map(|s| (s.y, s.step.next))
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return invalid(format!("momentum must lie in [0, 1], got {eta}"));
    }
    Ok(())
}

/// Both forms of the restart test for the step leaving `X_t`:
/// `⟨∇f(Y_{t−1}), X_t − X_{t−1}⟩` and its tangent-space counterpart at
/// `Y_{t−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartTest {
    pub t: usize,
    pub euclidean: f64,
    pub tangent: f64,
}

/// `⟨∇f(Y), X_t − X_{t−1}⟩` evaluated in measurement space as
/// `⟨A(Y) − y, A(X_t) − A(X_{t−1})⟩`.
pub fn euclidean_restart_inner(
    op: &SensingOperator,
    residual_y: &DVector<f64>,
    x: &FixedRankPoint,
    x_prev: &FixedRankPoint,
) -> f64 {
    residual_y.dot(&(op.apply_point(x) - op.apply_point(x_prev)))
}

/// `⟨grad f(Y), inv R_Y(X_t) − inv R_Y(X_{t−1})⟩`.
pub fn tangent_restart_inner(
    grad_y: &TangentVector,
    x: &FixedRankPoint,
    x_prev: &FixedRankPoint,
) -> Result<f64> {
    let y = grad_y.base();
    let diff = inverse_orthographic(y, x)?.axpy(-1.0, &inverse_orthographic(y, x_prev)?);
    Ok(grad_y.inner(&diff))
}

/// Restart counter update: back to one on a positive test, else up by one.
pub fn next_tau(tau: usize, inner: f64) -> usize {
    if inner > 0.0 {
        1
    } else {
        tau + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub residual: f64,
    pub loss: f64,
    /// Stepsize of the step that produced this iterate; zero at `t = 0`.
    pub mu: f64,
    pub eta: f64,
    pub restart: bool,
    pub wall_time_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TerminalStatus {
    Converged { iterations: usize },
    MaxIters,
    Diverged { iteration: usize },
    Error { iteration: usize, message: String },
}

impl TerminalStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, TerminalStatus::Converged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    pub restart_tests: Vec<RestartTest>,
    pub status: TerminalStatus,
    /// `σ_r(X★)`, which sets the basin radius.
    pub sigma_r: f64,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    /// First `t` with residual at most `BASIN_FRACTION · σ_r(X★)`.
    pub fn basin_entry(&self) -> Option<usize> {
        let radius = BASIN_FRACTION * self.sigma_r;
        self.records.iter().find(|r| r.residual <= radius).map(|r| r.t)
    }

    pub fn restart_count(&self) -> usize {
        self.records.iter().filter(|r| r.restart).count()
    }

    /// Asymptotic rate over the whole run; see [`fitted_rate_from`].
    pub fn fitted_rate(&self) -> Option<f64> {
        fitted_rate_from(self, DEFAULT_RATE_WINDOW, 0)
    }

    /// Asymptotic rate over iterations after basin entry.
    pub fn post_basin_rate(&self) -> Option<f64> {
        fitted_rate_from(self, DEFAULT_RATE_WINDOW, self.basin_entry()?)
    }

    /// Wall time of each step in nanoseconds.
    pub fn step_times_ns(&self) -> Vec<u64> {
        self.records.windows(2).map(|w| w[1].wall_time_ns - w[0].wall_time_ns).collect()
    }
}

/// Geometric mean of the last `window` residual ratios among iterations
/// after `start_t`, skipping steps that restarted the momentum.
pub fn fitted_rate_from(trace: &IterationTrace, window: usize, start_t: usize) -> Option<f64> {
    let ratios: Vec<f64> = trace
        .records
        .windows(2)
        .filter(|w| w[1].t > start_t && !w[1].restart && w[0].residual > 0.0 && w[1].residual > 0.0)
        .map(|w| (w[1].residual / w[0].residual).ln())
        .collect();
    if ratios.is_empty() || window == 0 {
        return None;
    }
    let tail = &ratios[ratios.len().saturating_sub(window)..];
    Some((tail.iter().sum::<f64>() / tail.len() as f64).exp())
}

/// Truncates `x0` to rank `r` and runs the configured algorithm.
pub fn run(inst: &ProblemInstance, cfg: &SolverConfig, x0: &DenseMatrix) -> Result<IterationTrace> {
    cfg.validate()?;
    if x0.shape() != inst.shape() {
        return Err(Error::DimensionMismatch { expected: inst.shape(), got: x0.shape() });
    }
    run_from_point(inst, cfg, truncate_rank(x0, inst.rank())?)
}

/// Per-algorithm state carried between iterations.
enum State {
    Plain,
    Momentum { prev: FixedRankPoint },
    OneSvd { z: DenseMatrix, x_dense: DenseMatrix },
    Restart { prev: FixedRankPoint, tau: usize, last: Option<(TangentVector, DVector<f64>)>, warm_done: bool },
}

struct Outcome {
    step: Step,
    eta: f64,
    restart: bool,
    test: Option<RestartTest>,
}

fn advance(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    state: &mut State,
    x: &FixedRankPoint,
    t: usize,
    residual: f64,
) -> Result<Outcome> {
    let rule = &cfg.stepsize;
    let plain = |step| Outcome { step, eta: 0.0, restart: false, test: None };
    match state {
        State::Plain => Ok(plain(match cfg.algorithm {
            Algorithm::Iht => iht_step(inst, x, rule)?,
            Algorithm::Grad => nag_step(inst, x, x, 0.0, rule)?,
            Algorithm::Rgrad => rgrad_step(inst, x, cfg.retraction, rule)?.step,
            other => unreachable!("{other} carries state"),
        })),
        State::Momentum { prev } => {
            let eta = momentum_schedule(&cfg.momentum, t, 1);
            let step = match cfg.algorithm {
                Algorithm::Nag => nag_step(inst, x, prev, eta, rule)?,
                Algorithm::Narg => narg_step(inst, x, prev, eta, rule)?.step,
                other => unreachable!("{other} is not a two-point method"),
            };
            *prev = x.clone();
            Ok(Outcome { step, eta, restart: false, test: None })
        }
        State::OneSvd { z, x_dense } => {
            let (moved, mu, grad_norm) = projected_gradient_move(inst, &x.to_dense(), x, rule)?;
            let eta = momentum_schedule(&cfg.momentum, t + 1, 1);
            *z = &moved + (&moved - &*x_dense) * eta;
            *x_dense = moved;
            let next = truncate_rank(z, inst.rank())?;
            Ok(Outcome { step: Step { next, mu, grad_norm }, eta, restart: false, test: None })
        }
        State::Restart { prev, tau, last, warm_done } => {
            let mut restart = false;
            let mut test = None;
            if let Some((grad_y, residual_y)) = last.as_ref() {
                let euclidean = euclidean_restart_inner(inst.operator(), residual_y, x, prev);
                let tangent = tangent_restart_inner(grad_y, x, prev)?;
                test = Some(RestartTest { t, euclidean, tangent });
                *tau = next_tau(*tau, euclidean);
                restart = *tau == 1;
            }
            if cfg.warm_restart && !*warm_done && residual <= BASIN_FRACTION * inst.ground_truth().sigma_min() {
                *warm_done = true;
                restart = t > 0;
                *tau = 1;
            }
            let eta = momentum_schedule(&Momentum::Restart, t, *tau);
            let ms = narg_step(inst, x, prev, eta, rule)?;
            *last = Some((ms.grad_y, ms.residual_y));
            *prev = x.clone();
            Ok(Outcome { step: ms.step, eta, restart, test })
        }
    }
}

/// Runs from a rank-`r` starting point. Step failures end the run with an
/// error status instead of returning `Err`.
pub fn run_from_point(inst: &ProblemInstance, cfg: &SolverConfig, x0: FixedRankPoint) -> Result<IterationTrace> {
    run_observed(inst, cfg, x0, &mut |_| {})
}

/// [`run_from_point`] with a callback on every accepted iterate.
pub fn run_observed(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    x0: FixedRankPoint,
    observe: &mut dyn FnMut(&FixedRankPoint),
) -> Result<IterationTrace> {
    cfg.validate()?;
    if x0.shape() != inst.shape() || x0.rank() != inst.rank() {
        return invalid(format!(
            "starting point has shape {:?} and rank {}, instance needs {:?} and rank {}",
            x0.shape(),
            x0.rank(),
            inst.shape(),
            inst.rank()
        ));
    }
    let xstar = inst.ground_truth();
    let loss_of = |x: &FixedRankPoint| 0.5 * residual_at(inst, x).norm_squared();
    let start = Instant::now();
    let mut state = match cfg.algorithm {
        Algorithm::Iht | Algorithm::Grad | Algorithm::Rgrad => State::Plain,
        Algorithm::Nag | Algorithm::Narg => State::Momentum { prev: x0.clone() },
        Algorithm::NagOneSvd => State::OneSvd { z: x0.to_dense(), x_dense: x0.to_dense() },
        Algorithm::NargRestart => State::Restart { prev: x0.clone(), tau: 1, last: None, warm_done: false },
    };
    let initial = x0.distance(xstar);
    let mut trace = IterationTrace {
        algorithm: cfg.algorithm,
        records: vec![IterationRecord {
            t: 0,
            residual: initial,
            loss: loss_of(&x0),
            mu: 0.0,
            eta: 0.0,
            restart: false,
            wall_time_ns: start.elapsed().as_nanos() as u64,
        }],
        restart_tests: Vec::new(),
        status: TerminalStatus::MaxIters,
        sigma_r: xstar.sigma_min(),
    };
    if !initial.is_finite() {
        trace.status = TerminalStatus::Diverged { iteration: 0 };
        return Ok(trace);
    }
    if initial <= cfg.stop_tol_resid {
        trace.status = TerminalStatus::Converged { iterations: 0 };
        return Ok(trace);
    }
    let mut x = x0;
    let mut residual = initial;
    for t in 0..cfg.max_iters {
        let outcome = match advance(inst, cfg, &mut state, &x, t, residual) {
            Ok(o) => o,
            Err(e) => {
                trace.status = TerminalStatus::Error { iteration: t, message: e.to_string() };
                return Ok(trace);
            }
        };
        if let Some(test) = outcome.test {
            trace.restart_tests.push(test);
        }
        x = outcome.step.next;
        observe(&x);
        residual = x.distance(xstar);
        let loss = loss_of(&x);
        trace.records.push(IterationRecord {
            t: t + 1,
            residual,
            loss,
            mu: outcome.step.mu,
            eta: outcome.eta,
            restart: outcome.restart,
            wall_time_ns: start.elapsed().as_nanos() as u64,
        });
        if !residual.is_finite() || !loss.is_finite() || residual > DIVERGENCE_FACTOR * initial {
            trace.status = TerminalStatus::Diverged { iteration: t + 1 };
            return Ok(trace);
        }
        let grad_small = cfg.stop_tol_grad.is_some_and(|tol| outcome.step.grad_norm <= tol);
        if residual <= cfg.stop_tol_resid || grad_small {
            trace.status = TerminalStatus::Converged { iterations: t + 1 };
            return Ok(trace);
        }
    }
    Ok(trace)
}

/// Runs and also returns the final iterate.
pub fn solve(inst: &ProblemInstance, cfg: &SolverConfig, x0: &DenseMatrix) -> Result<(IterationTrace, FixedRankPoint)> {
    cfg.validate()?;
    let start = truncate_rank(x0, inst.rank())?;
    let mut last = start.clone();
    let trace = run_observed(inst, cfg, start, &mut |x| last = x.clone())?;
    Ok((trace, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{projected_theta_spectrum, rho_exact_line_search, rho_iht, SpectralReport};
    use crate::linalg::{thin_svd, unvec};
    use crate::operators::{generate_instance, spectral_init_point, InstanceSpec};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Rank-`r` point at distance about `frac · σ_r` from the ground truth.
    fn near(inst: &ProblemInstance, frac: f64, seed: u64) -> FixedRankPoint {
        let xs = inst.ground_truth();
        let (n1, n2) = xs.shape();
        let g = gaussian(n1, n2, seed);
        truncate_rank(&(xs.to_dense() + g.clone() * (frac * xs.sigma_min() / g.norm())), inst.rank()).unwrap()
    }

    fn mc_with_report(n: usize, r: usize, p: f64, seed: u64) -> (ProblemInstance, SpectralReport) {
        for s in seed..seed + 100 {
            let inst = generate_instance(&InstanceSpec::completion(n, r, p, s)).unwrap();
            let rep = projected_theta_spectrum(&inst.operator().build_theta().unwrap(), inst.ground_truth()).unwrap();
            if rep.is_identifiable() && rep.lambda_min > 0.05 {
                return (inst, rep);
            }
        }
        panic!("no well-posed instance");
    }

    fn scale(inst: &ProblemInstance) -> f64 {
        inst.ground_truth().frobenius_norm()
    }

    #[test]
    fn momentum_schedule_cases() {
        for d in [0, 2, 20] {
            assert_eq!(momentum_schedule(&Momentum::Lazy { d }, 1, 1), 0.0);
            assert_eq!(momentum_schedule(&Momentum::Lazy { d }, 0, 1), 0.0);
        }
        assert!((momentum_schedule(&Momentum::Lazy { d: 2 }, 10, 1) - 9.0 / 12.0).abs() < 1e-15);
        assert_eq!(momentum_schedule(&Momentum::Constant { q: 1.0 }, 7, 1), 0.0);
        assert!((momentum_schedule(&Momentum::Constant { q: 0.25 }, 0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(momentum_schedule(&Momentum::Restart, 5, 1), 0.0);
        assert_eq!(momentum_schedule(&Momentum::Off, 5, 9), 0.0);
        let mut tau = 1;
        let mut last = -1.0;
        for _ in 0..50 {
            tau = next_tau(tau, -1.0);
            let eta = momentum_schedule(&Momentum::Restart, 0, tau);
            assert!(eta > last && eta < 1.0);
            last = eta;
        }
        assert_eq!(next_tau(tau, 1e-3), 1);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(Algorithm::Iht).with_stepsize(Stepsize::Constant { mu: 0.0 }).validate().is_err());
        assert!(SolverConfig::new(Algorithm::Narg).with_momentum(Momentum::Constant { q: 0.0 }).validate().is_err());
        assert!(SolverConfig::new(Algorithm::Narg).with_retraction(Retraction::Projective).validate().is_err());
        assert!(SolverConfig::new(Algorithm::Rgrad).with_momentum(Momentum::Restart).validate().is_err());
        assert!(SolverConfig::new(Algorithm::NargRestart).with_momentum(Momentum::Lazy { d: 2 }).validate().is_err());
        for a in Algorithm::ALL {
            assert!(SolverConfig::new(a).validate().is_ok());
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("narg+r".parse::<Algorithm>().unwrap(), Algorithm::NargRestart);
        assert!("adam".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let cfg: SolverConfig = serde_json::from_str(
            r#"{"algorithm":"NAG","momentum":{"rule":"lazy","d":2},"stepsize":{"rule":"constant","mu":0.5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Nag);
        assert_eq!(cfg.momentum, Momentum::Lazy { d: 2 });
        assert_eq!(cfg.max_iters, 1000);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"algorithm":"NAG","tolerance":1}"#).is_err());
        assert!(serde_json::from_str::<SolverConfig>(r#"{"momentum":{"rule":"lazy","d":2,"q":1}}"#).is_err());
        let round: SolverConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn line_search_cases() {
        let full = generate_instance(&InstanceSpec::completion(6, 2, 1.0, 1)).unwrap();
        let g = gaussian(6, 6, 2);
        assert!((exact_line_search(&g, full.operator()).unwrap() - 1.0).abs() < 1e-14);
        assert!(exact_line_search(&DMatrix::zeros(6, 6), full.operator()).is_err());

        let ms = generate_instance(&InstanceSpec::sensing(4, 1, 30, 3)).unwrap();
        let theta = ms.operator().build_theta().unwrap();
        let eig = crate::linalg::sym_eig(&theta.0).unwrap();
        for k in [0, 7, 15] {
            let dir = unvec(&eig.vectors.column(k).into_owned(), 4, 4);
            let mu = exact_line_search(&dir, ms.operator()).unwrap();
            assert!((mu - 1.0 / eig.values[k]).abs() < 1e-10 * mu);
        }

        let sparse = generate_instance(&InstanceSpec::completion(6, 1, 0.5, 4)).unwrap();
        let SensingOperator::Completion(m) = sparse.operator() else { unreachable!() };
        let mask = m.mask();
        let hidden = DMatrix::from_fn(6, 6, |i, j| if mask[(i, j)] { 0.0 } else { 1.0 });
        assert_eq!(exact_line_search(&hidden, sparse.operator()), Err(Error::UnmeasuredDirection));
    }

    #[test]
    fn stepsize_lies_in_projected_bracket() {
        let (inst, rep) = mc_with_report(8, 2, 0.7, 40);
        let x = near(&inst, 1e-4, 1);
        let (grad, _) = riemannian_gradient_at(&inst, &x).unwrap();
        let mu = tangent_line_search(&grad, inst.operator()).unwrap();
        assert!(mu >= (1.0 - 1e-2) / rep.lambda_max && mu <= (1.0 + 1e-2) / rep.lambda_min);
    }

    #[test]
    fn fixed_points() {
        let inst = generate_instance(&InstanceSpec::completion(10, 2, 0.7, 5)).unwrap();
        let xs = inst.ground_truth().clone();
        let tol = 1e-12 * scale(&inst);
        assert!(step_iht(&xs.to_dense(), &inst, 0.8).unwrap().distance(&xs) < tol);
        assert!(step_grad(&xs, &inst).unwrap().distance(&xs) < tol);
        assert!(step_nag(&xs, &xs, &inst, 0.7).unwrap().distance(&xs) < tol);
        for kind in [Retraction::Projective, Retraction::Orthographic] {
            assert!(step_rgrad(&xs, &inst, kind).unwrap().distance(&xs) < tol);
        }
        let (y, next) = step_narg(&xs, &xs, &inst, 0.7).unwrap();
        assert_eq!(y, xs);
        assert!(next.distance(&xs) < tol);
        for a in Algorithm::ALL {
            let cfg = SolverConfig::new(a).with_stop_tol(0.0).with_max_iters(3);
            let trace = run_from_point(&inst, &cfg, xs.clone()).unwrap();
            assert!(trace.records.iter().all(|r| r.residual < tol), "{a}");
        }
    }

    #[test]
    fn starting_at_truth_converges_immediately() {
        let inst = generate_instance(&InstanceSpec::sensing(6, 1, 40, 2)).unwrap();
        for a in Algorithm::ALL {
            let trace = run(&inst, &SolverConfig::new(a), &inst.ground_truth().to_dense()).unwrap();
            assert_eq!(trace.status, TerminalStatus::Converged { iterations: 0 });
            assert_eq!(trace.records.len(), 1);
        }
    }

    #[test]
    fn zero_gradient_leaves_point_unchanged() {
        let inst = generate_instance(&InstanceSpec::completion(5, 1, 1.0, 1)).unwrap();
        let xs = inst.ground_truth();
        let exact = FixedRankPoint::new(xs.u().clone(), xs.s().clone(), xs.v().clone()).unwrap();
        let (grad, _) = riemannian_gradient_at(&inst, &exact).unwrap();
        if grad.norm() == 0.0 {
            assert_eq!(step_rgrad(&exact, &inst, Retraction::Orthographic).unwrap(), exact);
        }
        let frozen = ProblemInstance::new(
            inst.operator().clone(),
            xs.clone(),
            inst.operator().apply_point(&near(&inst, 0.1, 3)),
            inst.sampling(),
            0,
        )
        .unwrap();
        let x = near(&inst, 0.1, 3);
        assert_eq!(step_rgrad(&x, &frozen, Retraction::Projective).unwrap(), x);
    }

    #[test]
    fn narg_without_motion_stays_put() {
        let inst = generate_instance(&InstanceSpec::completion(8, 2, 0.8, 9)).unwrap();
        let x = near(&inst, 0.1, 2);
        let (y, _) = step_narg(&x, &x, &inst, 0.9).unwrap();
        assert_eq!(y, x);
        let prev = near(&inst, 0.2, 3);
        let (y0, next) = step_narg(&x, &prev, &inst, 0.0).unwrap();
        assert_eq!(y0, x);
        assert_eq!(next, step_rgrad(&x, &inst, Retraction::Orthographic).unwrap());
    }

    #[test]
    fn iht_diverges_beyond_upper_stepsize() {
        let (inst, rep) = mc_with_report(10, 1, 0.7, 3);
        let x = near(&inst, 1e-3, 7);
        let cfg = SolverConfig::new(Algorithm::Iht)
            .with_stepsize(Stepsize::Constant { mu: 1.05 * rep.mu_double_dagger })
            .with_max_iters(50)
            .with_stop_tol(0.0);
        let trace = run_from_point(&inst, &cfg, x).unwrap();
        assert!(trace.final_residual() > 10.0 * trace.records[0].residual);
    }

    #[test]
    fn iht_rate_at_optimal_stepsize() {
        let (inst, rep) = mc_with_report(12, 1, 0.6, 11);
        let cfg = SolverConfig::new(Algorithm::Iht)
            .with_stepsize(Stepsize::Constant { mu: rep.mu_dagger })
            .with_stop_tol(1e-11)
            .with_max_iters(5000);
        let trace = run_from_point(&inst, &cfg, near(&inst, 0.1, 1)).unwrap();
        assert!(trace.status.is_converged());
        let fitted = trace.fitted_rate().unwrap();
        assert!((fitted - rho_iht(&rep, rep.mu_dagger)).abs() < 5e-2, "{fitted} vs {}", rho_iht(&rep, rep.mu_dagger));
    }

    #[test]
    fn rgrad_rate_matches_line_search_radius() {
        let (inst, rep) = mc_with_report(12, 1, 0.6, 21);
        let cfg = SolverConfig::new(Algorithm::Rgrad).with_stop_tol(1e-11).with_max_iters(5000);
        let trace = run_from_point(&inst, &cfg, near(&inst, 0.1, 1)).unwrap();
        assert!(trace.status.is_converged());
        let mu_tilde = trace.records.last().unwrap().mu;
        let predicted = rho_exact_line_search(&rep, mu_tilde).unwrap();
        let fitted = trace.fitted_rate().unwrap();
        assert!((fitted - predicted).abs() < 5e-2, "{fitted} vs {predicted}");
    }

    #[test]
    fn grad_matches_projective_rgrad_step() {
        let inst = generate_instance(&InstanceSpec::completion(15, 2, 0.6, 4)).unwrap();
        let xs = inst.ground_truth();
        let dir = tangent_project(xs, &gaussian(15, 15, 3)).unwrap();
        let x = crate::manifold::retract_projective(xs, &dir.scaled(1e-4 * xs.sigma_min() / dir.norm())).unwrap();
        let a = step_grad(&x, &inst).unwrap();
        let b = step_rgrad(&x, &inst, Retraction::Projective).unwrap();
        assert!(a.distance(&b) < 1e-8);
    }

    #[test]
    fn one_svd_variant_keeps_the_rate() {
        let (inst, _) = mc_with_report(12, 2, 0.7, 31);
        let x0 = near(&inst, 0.1, 2);
        let momentum = Momentum::Constant { q: 0.3 };
        let rates: Vec<f64> = [Algorithm::Nag, Algorithm::NagOneSvd]
            .into_iter()
            .map(|a| {
                let cfg = SolverConfig::new(a).with_momentum(momentum).with_stop_tol(1e-11).with_max_iters(3000);
                let t = run_from_point(&inst, &cfg, x0.clone()).unwrap();
                assert!(t.status.is_converged(), "{a}: {:?}", t.status);
                t.fitted_rate().unwrap()
            })
            .collect();
        assert!((rates[0] - rates[1]).abs() < 5e-3, "{rates:?}");
    }

    #[test]
    fn one_svd_without_momentum_is_grad() {
        let inst = generate_instance(&InstanceSpec::completion(10, 2, 0.7, 8)).unwrap();
        let x0 = near(&inst, 0.2, 1);
        let a = run_from_point(&inst, &SolverConfig::new(Algorithm::Grad).with_max_iters(15), x0.clone()).unwrap();
        let b = run_from_point(&inst, &SolverConfig::new(Algorithm::NagOneSvd).with_max_iters(15), x0).unwrap();
        for (p, q) in a.records.iter().zip(&b.records) {
            assert!((p.residual - q.residual).abs() <= 1e-10 * scale(&inst));
        }
    }

    #[test]
    fn restart_needs_fewer_iterations_than_rgrad() {
        let mut counts = (Vec::new(), Vec::new());
        for seed in 0..20 {
            let inst = generate_instance(&InstanceSpec::completion(20, 2, 0.5, 100 + seed)).unwrap();
            let x0 = spectral_init_point(&inst).unwrap();
            let r = run_from_point(&inst, &SolverConfig::new(Algorithm::Rgrad).with_max_iters(3000), x0.clone()).unwrap();
            let n = run_from_point(&inst, &SolverConfig::new(Algorithm::NargRestart).with_max_iters(3000), x0).unwrap();
            counts.0.push(r.iterations());
            counts.1.push(n.iterations());
        }
        counts.0.sort();
        counts.1.sort();
        assert!(counts.1[10] < counts.0[10], "{counts:?}");
    }

    #[test]
    fn trace_records_are_ordered() {
        let inst = generate_instance(&InstanceSpec::completion(12, 2, 0.6, 2)).unwrap();
        let trace = run(&inst, &SolverConfig::new(Algorithm::NargRestart), &gaussian(12, 12, 0)).unwrap();
        for (k, w) in trace.records.windows(2).enumerate() {
            assert_eq!(w[0].t, k);
            assert_eq!(w[1].t, k + 1);
            assert!(w[1].wall_time_ns >= w[0].wall_time_ns);
        }
        let first = trace.records[1];
        assert_eq!(first.eta, 0.0);
        assert!(!first.restart);
    }

    #[test]
    fn fitted_rate_of_geometric_sequence() {
        let records = (0..40)
            .map(|t| IterationRecord {
                t,
                residual: 0.5_f64.powi(t as i32) * if t % 7 == 3 { 4.0 } else { 1.0 },
                loss: 0.0,
                mu: 0.0,
                eta: 0.0,
                restart: t % 7 == 3 || t % 7 == 4,
                wall_time_ns: t as u64,
            })
            .collect();
        let trace = IterationTrace {
            algorithm: Algorithm::Rgrad,
            records,
            restart_tests: vec![],
            status: TerminalStatus::MaxIters,
            sigma_r: 1.0,
        };
        assert!((trace.fitted_rate().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(trace.restart_count(), 12);
        assert_eq!(trace.step_times_ns(), vec![1; 39]);
    }

    #[test]
    fn step_errors_end_the_run_with_status() {
        let inst = generate_instance(&InstanceSpec::completion(6, 1, 0.5, 4)).unwrap();
        let huge = SolverConfig::new(Algorithm::Iht).with_stepsize(Stepsize::Constant { mu: 1e6 });
        let trace = run_from_point(&inst, &huge, near(&inst, 0.5, 1)).unwrap();
        assert!(matches!(trace.status, TerminalStatus::Diverged { .. } | TerminalStatus::Error { .. }));
    }

    #[test]
    fn niht_variants_run() {
        let inst = generate_instance(&InstanceSpec::completion(12, 2, 0.7, 6)).unwrap();
        for variant in [NihtVariant::U, NihtVariant::V, NihtVariant::Uv] {
            let cfg = SolverConfig::new(Algorithm::Iht).with_stepsize(Stepsize::Niht { variant });
            let trace = run_from_point(&inst, &cfg, near(&inst, 0.1, 2)).unwrap();
            assert!(trace.status.is_converged(), "{variant:?}: {:?}", trace.status);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn unit_step_completion_identity(n in 4usize..10, seed in any::<u64>()) {
            let inst = generate_instance(&InstanceSpec::completion(n, 1, 0.6, seed)).unwrap();
            let x = gaussian(n, n, seed ^ 1);
            let SensingOperator::Completion(m) = inst.operator() else { unreachable!() };
            let mask = m.mask();
            let observed = inst.operator().adjoint(inst.observations()).unwrap();
            let filled = DMatrix::from_fn(n, n, |i, j| if mask[(i, j)] { observed[(i, j)] } else { x[(i, j)] });
            let svd = thin_svd(&filled).unwrap();
            prop_assume!(svd.s[0] > 1.01 * svd.s[1]);
            let a = step_iht(&x, &inst, 1.0).unwrap();
            let b = truncate_rank(&filled, 1).unwrap();
            prop_assert!(a.distance(&b) <= 1e-10 * filled.norm());
        }

        #[test]
        fn iterates_keep_rank_and_descend(n in 6usize..12, r in 1usize..3, seed in any::<u64>()) {
            let inst = generate_instance(&InstanceSpec::completion(n, r, 0.8, seed)).unwrap();
            let x0 = near(&inst, 0.05, seed ^ 9);
            for alg in [Algorithm::Grad, Algorithm::Rgrad] {
                let cfg = SolverConfig::new(alg).with_max_iters(40).with_stop_tol(1e-10);
                let mut ranks_ok = true;
                let trace = run_observed(&inst, &cfg, x0.clone(), &mut |x| {
                    ranks_ok &= x.rank() == r && x.sigma_min() > 1e-9 * x.s()[0];
                }).unwrap();
                prop_assert!(ranks_ok);
                for w in trace.records.windows(2) {
                    prop_assert!(w[1].loss <= w[0].loss + 1e-12 * w[0].loss.max(1e-12));
                }
            }
        }

        #[test]
        fn zero_momentum_reduces_to_gradient_methods(n in 6usize..11, seed in any::<u64>()) {
            let inst = generate_instance(&InstanceSpec::completion(n, 2, 0.8, seed)).unwrap();
            let x0 = near(&inst, 0.1, seed ^ 3);
            let base = SolverConfig::new(Algorithm::Grad).with_max_iters(10).with_stop_tol(0.0);
            let off = Momentum::Constant { q: 1.0 };
            let grad = run_from_point(&inst, &base, x0.clone()).unwrap();
            let nag = run_from_point(&inst, &SolverConfig { algorithm: Algorithm::Nag, momentum: off, ..base.clone() }, x0.clone()).unwrap();
            let rgrad = run_from_point(&inst, &SolverConfig { algorithm: Algorithm::Rgrad, ..base.clone() }, x0.clone()).unwrap();
            let narg = run_from_point(&inst, &SolverConfig { algorithm: Algorithm::Narg, momentum: off, ..base }, x0).unwrap();
            let tol = 1e-10 * scale(&inst);
            for (a, b) in grad.records.iter().zip(&nag.records) {
                prop_assert!((a.residual - b.residual).abs() <= tol);
            }
            for (a, b) in rgrad.records.iter().zip(&narg.records) {
                prop_assert!((a.residual - b.residual).abs() <= tol);
            }
        }

        #[test]
        fn stepsize_bracket_near_truth(n in 6usize..10, seed in any::<u64>()) {
            let inst = generate_instance(&InstanceSpec::completion(n, 1, 0.8, seed)).unwrap();
            let rep = projected_theta_spectrum(&inst.operator().build_theta().unwrap(), inst.ground_truth()).unwrap();
            prop_assume!(rep.is_identifiable());
            let frac = 1e-3;
            let x = near(&inst, frac, seed ^ 5);
            let (grad, _) = riemannian_gradient_at(&inst, &x).unwrap();
            let mu = tangent_line_search(&grad, inst.operator()).unwrap();
            let slack = 10.0 * frac * rep.kappa;
            prop_assert!(mu >= (1.0 - slack) / rep.lambda_max && mu <= (1.0 + slack) / rep.lambda_min,
                "{} not in [{}, {}]", mu, 1.0 / rep.lambda_max, 1.0 / rep.lambda_min);
        }

        #[test]
        fn restart_tests_agree_in_sign(n in 8usize..14, seed in any::<u64>()) {
            let inst = generate_instance(&InstanceSpec::completion(n, 2, 0.7, seed)).unwrap();
            let cfg = SolverConfig::new(Algorithm::NargRestart).with_max_iters(300);
            let trace = run_from_point(&inst, &cfg, near(&inst, 0.3, seed ^ 7)).unwrap();
            for test in &trace.restart_tests {
                if test.euclidean.abs() > 1e-10 && test.tangent.abs() > 1e-10 {
                    prop_assert_eq!(test.euclidean > 0.0, test.tangent > 0.0, "{:?}", test);
                }
            }
        }
    }
}
