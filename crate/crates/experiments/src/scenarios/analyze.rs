//! Spectral report of one or more instances, with no solver runs.

use super::{analysis_feasible, default_instance, prepare_all, ScenarioOutcome};
use crate::config::{ConfigError, ScenarioConfig, ScenarioKind};
use crate::output::{num, ScenarioResult, SeedReport, Table};

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    let inst_cfg = cfg.instance_or(default_instance());
    if !analysis_feasible(&inst_cfg) {
        return Err(ConfigError::new("instance", "too large for the explicit spectral analysis").into());
    }
    let seeds = cfg.seeds_or(&[0]);
    let preps = prepare_all(&inst_cfg, &cfg.init, &seeds, true)?;
    let mut result = ScenarioResult::new(ScenarioKind::Analyze);
    let mut table = Table::new(
        "analyze",
        &[
            "seed", "lambda_max", "lambda_min", "kappa", "mu_dagger", "mu_double_dagger", "mu_flat", "eta_flat",
            "rho_opt", "tangent_dim", "unobservable_dims",
        ],
    );
    for p in preps {
        let r = p.report.expect("feasible analysis");
        table.push(vec![
            p.seed.to_string(),
            num(r.lambda_max),
            num(r.lambda_min),
            num(r.kappa),
            num(r.mu_dagger),
            num(r.mu_double_dagger),
            num(r.mu_flat),
            num(r.eta_flat),
            num(r.rho_opt),
            r.tangent_dim.to_string(),
            r.unobservable_dims.to_string(),
        ]);
        result.reports.push(SeedReport { seed: p.seed, report: r });
    }
    result.tables.push(table);
    Ok(result)
}
