//! Exact-line-search steepest descent on a 2-D quadratic, fitted rate
//! against the line-search rate formula over a grid of starting angles.

use std::f64::consts::PI;

use lowrank::analysis::quadratic_line_search_rate;
use lowrank::oracle::jacobi_eigenvalues;
use nalgebra::{DMatrix, Matrix2};

use super::ScenarioOutcome;
use crate::config::{ScenarioConfig, ScenarioKind};
use crate::output::{num, opt, Check, ScenarioResult, Table};
use crate::quadratic::{eigen_frame, exact_line_search_descent, start_point, QuadraticRun};

/// Residual ratios averaged by the fitted rate.
pub const RATE_WINDOW: usize = 20;
/// Tolerance on `1/μ̂ + 1/μ̌ = λmax + λmin`.
pub const PAIR_TOLERANCE: f64 = 1e-6;

struct AngleRun {
    theta: f64,
    run: QuadraticRun,
    fitted: f64,
    predicted: Option<f64>,
}

fn angle_run(q: &Matrix2<f64>, spectrum: (f64, f64), alpha: f64, theta: f64, max_iters: usize, tol: f64) -> AngleRun {
    let run = exact_line_search_descent(q, start_point(q, alpha, theta), max_iters, tol);
    let fitted = run.fitted_rate(RATE_WINDOW);
    // The zigzag repeats its stepsize pair exactly, so the first stepsize
    // is the one the formula needs.
    let predicted = run.stepsizes.first().and_then(|&mu| quadratic_line_search_rate(spectrum, mu).ok());
    AngleRun { theta, run, fitted, predicted }
}

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    let p = &cfg.quadratic;
    let q = Matrix2::new(p.q[0][0], p.q[0][1], p.q[1][0], p.q[1][1]);
    let (lmax, lmin, alpha) = eigen_frame(&q);
    let oracle_eigs = jacobi_eigenvalues(&DMatrix::from_row_slice(2, 2, &[p.q[0][0], p.q[0][1], p.q[1][0], p.q[1][1]]))?;
    let (emin, emax) = oracle_eigs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let kappa = emax / emin;
    let bound = (kappa - 1.0) / (kappa + 1.0);

    let runs: Vec<AngleRun> = (0..p.thetas)
        .map(|k| angle_run(&q, (lmax, lmin), alpha, 2.0 * PI * k as f64 / p.thetas as f64, p.max_iters, p.tol))
        .collect();

    let mut result = ScenarioResult::new(ScenarioKind::Quadratic);
    let mut table = Table::new(
        "quadratic",
        &["theta", "steps", "mu_hat", "mu_check", "fitted_rate", "predicted_rate", "abs_error", "pair_error"],
    );
    let mut traces = Table::new("quadratic_traces", &["theta", "t", "residual", "stepsize"]);
    let mut worst_rate = 0.0_f64;
    let mut worst_pair = 0.0_f64;
    for a in &runs {
        let err = a.predicted.map(|pr| (a.fitted - pr).abs());
        worst_rate = worst_rate.max(err.unwrap_or(f64::INFINITY));
        let pair = a.run.stepsize_pair();
        let pair_err = pair.map(|(h, c)| (1.0 / h + 1.0 / c - (lmax + lmin)).abs());
        if a.run.steps() >= 3 {
            worst_pair = worst_pair.max(pair_err.unwrap_or(f64::INFINITY));
        }
        table.push(vec![
            num(a.theta),
            a.run.steps().to_string(),
            opt(pair.map(|p| p.0)),
            opt(pair.map(|p| p.1)),
            num(a.fitted),
            opt(a.predicted),
            opt(err),
            opt(pair_err),
        ]);
        for (t, r) in a.run.residuals.iter().enumerate() {
            traces.push(vec![num(a.theta), t.to_string(), num(*r), opt(a.run.stepsizes.get(t).copied())]);
        }
    }

    let zero = angle_run(&q, (lmax, lmin), alpha, 0.0, p.max_iters, p.tol);
    let quarter = angle_run(&q, (lmax, lmin), alpha, PI / 4.0, p.max_iters, p.tol);
    let eighth = angle_run(&q, (lmax, lmin), alpha, PI / 8.0, p.max_iters, p.tol);
    result.checks.push(Check::new(
        "theta_zero_one_step",
        zero.run.steps() == 1,
        format!("steps = {}, final residual {:e}", zero.run.steps(), zero.run.residuals.last().unwrap()),
    ));
    let quarter_err = (quarter.fitted - bound).abs();
    result.checks.push(Check::new(
        "quarter_pi_hits_bound",
        quarter_err <= p.rate_tolerance,
        format!("fitted {} vs (kappa-1)/(kappa+1) = {bound}, kappa = {kappa}", quarter.fitted),
    ));
    let eighth_err = eighth.predicted.map_or(f64::INFINITY, |pr| (eighth.fitted - pr).abs());
    result.checks.push(Check::new(
        "eighth_pi_matches_formula",
        eighth_err <= p.rate_tolerance,
        format!("fitted {} vs predicted {}", eighth.fitted, opt(eighth.predicted)),
    ));
    result.checks.push(Check::new(
        "rate_matches_formula",
        worst_rate <= p.rate_tolerance,
        format!("max |fitted - predicted| = {worst_rate:e} over {} angles", runs.len()),
    ));
    result.checks.push(Check::new(
        "stepsize_pair_identity",
        worst_pair <= PAIR_TOLERANCE,
        format!("max |1/mu_hat + 1/mu_check - (lmax + lmin)| = {worst_pair:e}"),
    ));
    result.tables.push(table);
    result.tables.push(traces);
    result.plots.push((
        "quadratic".into(),
        "set datafile separator ','\nset xlabel 'theta'\nset ylabel 'rate'\nset key autotitle columnhead\n\
         plot 'quadratic.csv' using 1:5 with points title 'fitted', \\\n     \
         'quadratic.csv' using 1:6 with lines title 'formula'\n"
            .into(),
    ));
    Ok(result)
}
