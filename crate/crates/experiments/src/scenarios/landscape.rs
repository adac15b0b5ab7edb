//! Closed-form `ρ(T(μ, η))` over a stepsize-momentum grid with its damping
//! regimes and the momentum at which the slow and fast modes cross.

use lowrank::analysis::{critical_eta, crossing_eta, landscape, rho_t, Regime};

use super::radius::identifiable_instance;
use super::{default_instance, ScenarioOutcome};
use crate::config::{ScenarioConfig, ScenarioKind};
use crate::output::{num, opt, Check, ScenarioResult, SeedReport, Table};

/// Slack when comparing grid values with the optimal rate.
pub const OPTIMUM_SLACK: f64 = 1e-12;

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    let p = &cfg.landscape;
    let inst_cfg = cfg.instance_or(default_instance());
    let (inst, report) = identifiable_instance(&inst_cfg, cfg.seeds_or(&[0])[0])?;
    let top = p.mu_span * report.mu_double_dagger;
    let mus: Vec<f64> = (0..p.mu_points).map(|k| top * (k + 1) as f64 / p.mu_points as f64).collect();
    let etas: Vec<f64> = (0..p.eta_points).map(|k| k as f64 / p.eta_points as f64).collect();
    let points = landscape(&report, &mus, &etas);

    let mut grid = Table::new("landscape", &["mu", "eta", "rho", "regime"]);
    for pt in &points {
        grid.push(vec![num(pt.mu), num(pt.eta), num(pt.rho), pt.regime.as_str().into()]);
    }
    let mut curves = Table::new("landscape_curves", &["mu", "crossing_eta", "critical_eta_slow", "critical_eta_fast"]);
    for &mu in &mus {
        curves.push(vec![
            num(mu),
            opt(crossing_eta(&report, mu)),
            num(critical_eta(mu * report.lambda_min)),
            num(critical_eta(mu * report.lambda_max)),
        ]);
    }

    let mut result = ScenarioResult::new(ScenarioKind::Landscape);
    result.reports.push(SeedReport { seed: inst.seed(), report: report.clone() });
    let lowest = points.iter().map(|p| p.rho).fold(f64::INFINITY, f64::min);
    result.checks.push(Check::new(
        "grid_not_below_optimum",
        lowest >= report.rho_opt - OPTIMUM_SLACK,
        format!("grid minimum {lowest}, optimal rate {}", report.rho_opt),
    ));
    let opt_point = rho_t(&report, report.mu_flat, report.eta_flat);
    result.checks.push(Check::new(
        "optimum_is_critically_damped",
        opt_point.regime == Regime::Critical,
        format!("regime at (mu_flat, eta_flat): {}", opt_point.regime.as_str()),
    ));
    result.tables.push(grid);
    result.tables.push(curves);
    result.plots.push((
        "landscape".into(),
        "set datafile separator ','\nset xlabel 'mu'\nset ylabel 'eta'\nset view map\nset dgrid3d\n\
         set contour base\nset cntrparam levels 12\n\
         splot 'landscape.csv' using 1:2:3 skip 1 with pm3d title 'rho(T)'\n"
            .into(),
    ));
    Ok(result)
}
