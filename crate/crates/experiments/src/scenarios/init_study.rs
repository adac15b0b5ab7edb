//! Spectral against noisy starting points: time to reach the basin and the
//! local rate after it.

use lowrank::operators::{random_init, MeasurementKind};
use lowrank::solvers::Algorithm;
use rayon::prelude::*;

use super::{default_instance, default_seeds, init_seed, prepare_all, run_entry, seed_list, Prepared, ScenarioOutcome};
use crate::config::{AlgorithmEntry, InitConfig, ScenarioConfig, ScenarioKind};
use crate::output::{opt, residual_plot, trace_stem, Check, ScenarioResult, Table};
use crate::stats::{median, monotonicity_violations};
use crate::summary::TraceRun;

pub const SPECTRAL_LABEL: &str = "SPECTRAL";
/// Noise levels up to this value enter the sensing spread check.
pub const SPREAD_SIGMA_MAX: f64 = 1.0;
/// Allowed ratio between the largest and smallest median basin entry for
/// sensing.
pub const SPREAD_FACTOR: f64 = 2.0;

pub fn sigma_label(sigma: f64) -> String {
    format!("RANDOM-SIGMA{sigma}")
}

fn basin_steps(run: &TraceRun) -> Option<f64> {
    run.trace.basin_entry().map(|t| t as f64)
}

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    let p = &cfg.init_study;
    let inst_cfg = cfg.instance_or(default_instance());
    let seeds = cfg.seeds_or(&default_seeds());
    let entry = cfg.algorithms_or(vec![AlgorithmEntry::new(Algorithm::Rgrad)]).remove(0);
    let preps = prepare_all(&inst_cfg, &InitConfig::Spectral, &seeds, false)?;

    let mut cells: Vec<(String, Option<f64>, &Prepared)> = Vec::new();
    for prep in &preps {
        cells.push((SPECTRAL_LABEL.into(), None, prep));
        for &s in &p.sigmas {
            cells.push((sigma_label(s), Some(s), prep));
        }
    }
    let runs: Vec<TraceRun> = cells
        .par_iter()
        .map(|(label, sigma, prep)| {
            let start = match sigma {
                None => (*prep).clone(),
                Some(s) => Prepared { x0: random_init(&prep.instance, *s, init_seed(prep.seed))?, ..(*prep).clone() },
            };
            let mut run = run_entry(&start, &entry, &p.stop)?;
            run.label = label.clone();
            Ok(run)
        })
        .collect::<Result<_, super::ScenarioError>>()?;

    let mut result = ScenarioResult::new(ScenarioKind::InitStudy);
    let mut table = Table::new(
        "init_study",
        &["init", "sigma", "median_iterations_to_basin", "median_post_basin_rate", "median_iterations", "failures"],
    );
    let group = |label: &str| runs.iter().filter(|r| r.label == label).collect::<Vec<_>>();
    let mut basin_medians = Vec::new();
    let mut rate_devs = Vec::new();
    let mut labels: Vec<(String, Option<f64>)> = vec![(SPECTRAL_LABEL.into(), None)];
    labels.extend(p.sigmas.iter().map(|&s| (sigma_label(s), Some(s))));
    for (label, sigma) in &labels {
        let basin = median(&group(label).into_iter().filter_map(basin_steps).collect::<Vec<_>>());
        let rate = median(&group(label).into_iter().filter_map(|r| r.trace.post_basin_rate()).collect::<Vec<_>>());
        let iters = median(&group(label).into_iter().map(|r| r.trace.iterations() as f64).collect::<Vec<_>>());
        let failures = group(label).into_iter().filter(|r| !r.trace.status.is_converged()).count();
        table.push(vec![
            if sigma.is_some() { "random".into() } else { "spectral".into() },
            opt(*sigma),
            opt(basin),
            opt(rate),
            opt(iters),
            failures.to_string(),
        ]);
        if let Some(s) = sigma {
            basin_medians.push((*s, basin));
            // Signed per-seed gap to the spectral start, over converged runs.
            let devs: Vec<f64> = preps
                .iter()
                .filter_map(|prep| {
                    let find = |l: &str| runs.iter().find(|r| r.seed == prep.seed && r.label == l);
                    let (a, b) = (find(label)?, find(SPECTRAL_LABEL)?);
                    if !(a.trace.status.is_converged() && b.trace.status.is_converged()) {
                        return None;
                    }
                    Some(a.trace.post_basin_rate()? - b.trace.post_basin_rate()?)
                })
                .collect();
            rate_devs.push((*s, median(&devs)));
        }
    }

    let worst = rate_devs.iter().map(|(_, d)| d.map_or(f64::INFINITY, f64::abs)).fold(0.0, f64::max);
    result.checks.push(Check::new(
        "rate_independent_of_init",
        worst <= p.rate_tolerance,
        format!(
            "median post-basin rate gap to spectral start by sigma: [{}]",
            rate_devs.iter().map(|(s, d)| format!("{s}: {}", opt(*d))).collect::<Vec<_>>().join(", ")
        ),
    ));
    if p.sigmas.contains(&0.0) {
        let same = preps.iter().all(|prep| {
            let find = |l: &str| runs.iter().find(|r| r.seed == prep.seed && r.label == l);
            match (find(&sigma_label(0.0)), find(SPECTRAL_LABEL)) {
                (Some(a), Some(b)) => {
                    a.trace.records.len() == b.trace.records.len()
                        && a.trace.records.iter().zip(&b.trace.records).all(|(x, y)| x.residual == y.residual)
                }
                _ => false,
            }
        });
        result.checks.push(Check::new("sigma_zero_is_spectral", same, "residual sequences compared exactly"));
    }
    basin_medians.sort_by(|a, b| a.0.total_cmp(&b.0));
    let medians: Vec<f64> = basin_medians.iter().map(|(_, m)| m.unwrap_or(f64::INFINITY)).collect();
    match inst_cfg.kind {
        MeasurementKind::Completion => {
            let v = monotonicity_violations(&medians, true);
            result.checks.push(Check::new(
                "basin_entry_nondecreasing_in_sigma",
                v == 0,
                format!("median iterations to basin by increasing sigma: {medians:?}"),
            ));
        }
        MeasurementKind::Sensing => {
            let small: Vec<f64> =
                basin_medians.iter().filter(|(s, _)| *s <= SPREAD_SIGMA_MAX).map(|(_, m)| m.unwrap_or(f64::INFINITY)).collect();
            let hi = small.iter().copied().fold(0.0, f64::max);
            let lo = small.iter().copied().fold(f64::INFINITY, f64::min);
            result.checks.push(Check::new(
                "basin_entry_spread",
                hi <= SPREAD_FACTOR * lo.max(1.0),
                format!("median iterations to basin for sigma <= {SPREAD_SIGMA_MAX}: {small:?}"),
            ));
        }
    }

    result.tables.push(table);
    let first = seeds[0];
    let stems: Vec<(String, String)> =
        runs.iter().filter(|r| r.seed == first).map(|r| (r.label.clone(), trace_stem(&r.label, r.seed))).collect();
    result.plots.push(("residuals".into(), residual_plot(&format!("seeds {}; showing seed {first}", seed_list(&seeds)), &stems)));
    result.runs = runs;
    Ok(result)
}
