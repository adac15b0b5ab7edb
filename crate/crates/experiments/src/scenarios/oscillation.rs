//! Momentum sweeps: constant `q` around `q★ = 1/κ`, the lazy schedule over
//! `d`, and adaptive restart as the reference.

use lowrank::manifold::Retraction;
use lowrank::solvers::{Algorithm, Momentum};

use super::{default_instance, default_seeds, prepare_all, run_grid, seed_list, ScenarioOutcome};
use crate::config::{AlgorithmEntry, ScenarioConfig, ScenarioKind};
use crate::output::{num, opt, residual_plot, trace_stem, Check, ScenarioResult, SeedReport, Table};
use crate::scenarios::compare::rate_check;
use crate::stats::{median, monotonicity_violations};
use crate::summary::TraceRun;

/// Per-iteration relative tolerance for the `q = 1` run against plain
/// Riemannian gradient descent.
pub const DEGENERATE_TOLERANCE: f64 = 1e-10;

pub fn q_label(alg: Algorithm, factor: f64) -> String {
    format!("{}-Q{factor}QSTAR", alg.name())
}

pub fn lazy_label(alg: Algorithm, d: usize) -> String {
    format!("{}-LAZY{d}", alg.name())
}

fn median_rate(runs: &[TraceRun], label: &str) -> Option<f64> {
    median(&runs.iter().filter(|r| r.label == label).filter_map(|r| r.fitted()).collect::<Vec<_>>())
}

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    let p = &cfg.oscillation;
    let alg = p.algorithm;
    let inst_cfg = cfg.instance_or(default_instance());
    let seeds = cfg.seeds_or(&default_seeds());
    let q_one = format!("{}-Q1", alg.name());
    let reference = "RGRAD-ORTH";

    let mut entries: Vec<AlgorithmEntry> =
        p.q_factors.iter().map(|&f| AlgorithmEntry::new(alg).with_q_relative(f).labeled(&q_label(alg, f))).collect();
    entries.push(AlgorithmEntry::new(alg).with_momentum(Momentum::Constant { q: 1.0 }).labeled(&q_one));
    entries.extend(
        p.d_values.iter().map(|&d| AlgorithmEntry::new(alg).with_momentum(Momentum::Lazy { d }).labeled(&lazy_label(alg, d))),
    );
    entries.push(AlgorithmEntry::new(Algorithm::NargRestart));
    entries.push(AlgorithmEntry::new(Algorithm::Rgrad).with_retraction(Retraction::Orthographic).labeled(reference));

    let preps = prepare_all(&inst_cfg, &cfg.init, &seeds, true)?;
    let runs = run_grid(&preps, &entries, &p.stop)?;
    let mut result = ScenarioResult::new(ScenarioKind::Oscillation);
    result.reports = preps.iter().filter_map(|p| Some(SeedReport { seed: p.seed, report: p.report.clone()? })).collect();

    let mut q_table = Table::new("q_sweep", &["q_over_qstar", "median_fitted_rate", "median_predicted_rate"]);
    let mut q_rates = Vec::new();
    for &f in &p.q_factors {
        let label = q_label(alg, f);
        let m = median_rate(&runs, &label);
        let pr = median(&runs.iter().filter(|r| r.label == label).filter_map(|r| r.predicted_rate).collect::<Vec<_>>());
        q_table.push(vec![num(f), opt(m), opt(pr)]);
        q_rates.push((label, m));
    }
    q_rates.push((q_one.clone(), median_rate(&runs, &q_one)));
    // q = 1 sits at q/q★ = κ.
    let kappa = median(&result.reports.iter().map(|r| r.report.kappa).collect::<Vec<_>>());
    q_table.push(vec![opt(kappa), opt(median_rate(&runs, &q_one)), String::new()]);

    let mut d_table = Table::new("d_sweep", &["d", "median_fitted_rate", "median_predicted_rate"]);
    let mut d_rates = Vec::new();
    for &d in &p.d_values {
        let label = lazy_label(alg, d);
        let m = median_rate(&runs, &label);
        let pr = median(&runs.iter().filter(|r| r.label == label).filter_map(|r| r.predicted_rate).collect::<Vec<_>>());
        d_table.push(vec![d.to_string(), opt(m), opt(pr)]);
        d_rates.push(m.unwrap_or(f64::NAN));
    }

    let analyzed = result.reports.len() == preps.len();
    if analyzed {
        if p.q_factors.contains(&1.0) {
            let star = q_label(alg, 1.0);
            result.checks.push(rate_check(&runs, &star, p.rate_tolerance, false));
            let star_rate = median_rate(&runs, &star).unwrap_or(f64::INFINITY);
            let beaten: Vec<String> = q_rates
                .iter()
                .filter(|(l, m)| *l != star && m.is_none_or(|m| m < star_rate))
                .map(|(l, m)| format!("{l} ({})", opt(*m)))
                .collect();
            result.checks.push(Check::new(
                "qstar_dominates_q_sweep",
                beaten.is_empty(),
                format!("median rate at q* {star_rate}; faster or rateless: [{}]", beaten.join(", ")),
            ));
        }
        result.checks.push(rate_check(&runs, Algorithm::NargRestart.name(), p.rate_tolerance, false));
    }
    let mut sorted_d: Vec<(usize, f64)> = p.d_values.iter().copied().zip(d_rates.iter().copied()).collect();
    sorted_d.sort_by_key(|&(d, _)| d);
    let ordered: Vec<f64> = sorted_d.iter().map(|&(_, m)| m).collect();
    let violations = monotonicity_violations(&ordered, false);
    result.checks.push(Check::new(
        "larger_d_faster",
        violations == 0 && ordered.iter().all(|m| m.is_finite()),
        format!("median fitted rates by increasing d: {ordered:?}"),
    ));

    let mut worst = 0.0_f64;
    for s in &seeds {
        let find = |l: &str| runs.iter().find(|r| r.seed == *s && r.label == l);
        if let (Some(a), Some(b)) = (find(&q_one), find(reference)) {
            if a.trace.records.len() != b.trace.records.len() {
                worst = f64::INFINITY;
            }
            for (x, y) in a.trace.records.iter().zip(&b.trace.records) {
                worst = worst.max((x.residual - y.residual).abs() / y.residual.max(f64::MIN_POSITIVE));
            }
        }
    }
    result.checks.push(Check::new(
        "q_one_is_plain_gradient",
        worst <= DEGENERATE_TOLERANCE,
        format!("max relative residual gap to {reference}: {worst:e}"),
    ));

    result.tables.push(q_table);
    result.tables.push(d_table);
    let first = seeds[0];
    let stems: Vec<(String, String)> =
        runs.iter().filter(|r| r.seed == first).map(|r| (r.label.clone(), trace_stem(&r.label, r.seed))).collect();
    result.plots.push(("residuals".into(), residual_plot(&format!("seeds {}; showing seed {first}", seed_list(&seeds)), &stems)));
    result.runs = runs;
    Ok(result)
}
