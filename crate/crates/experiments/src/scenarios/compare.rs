//! All seven methods on matched instances: iteration counts, wall time,
//! fitted against predicted rates, and the restart-test agreement of the
//! adaptive-restart runs.

use lowrank::linalg::DenseMatrix;
use lowrank::manifold::Retraction;
use lowrank::operators::ProblemInstance;
use lowrank::solvers::{Algorithm, IterationTrace, Momentum, NihtVariant, Stepsize, TerminalStatus};
use rayon::prelude::*;

use super::{
    basin_start, default_instance, default_seeds, entry_config, prepare_all, restart_sign_counts, run_grid,
    seed_list, Prepared, ScenarioError, ScenarioOutcome,
};
use crate::config::{AlgorithmEntry, ScenarioConfig, ScenarioKind, StepBase, StopRule};
use crate::output::{num, residual_plot, trace_stem, Check, ScenarioResult, SeedReport, Table};
use crate::stats::median;
use crate::summary::TraceRun;

/// A solver from outside this crate that can join the comparison.
pub trait PluginSolver: Sync {
    fn label(&self) -> String;
    fn run(&self, inst: &ProblemInstance, x0: &DenseMatrix) -> lowrank::Result<IterationTrace>;
}

pub fn default_algorithms() -> Vec<AlgorithmEntry> {
    vec![
        AlgorithmEntry::new(Algorithm::Iht).with_mu_relative(1.0).labeled("IHT"),
        AlgorithmEntry::new(Algorithm::Iht).with_mu_relative(0.5).labeled("IHT-0.5MU"),
        AlgorithmEntry::new(Algorithm::Iht)
            .with_mu_relative(0.9)
            .with_mu_base(StepBase::DoubleDagger)
            .labeled("IHT-0.9MUMAX"),
        AlgorithmEntry::new(Algorithm::Iht)
            .with_mu_relative(1.05)
            .with_mu_base(StepBase::DoubleDagger)
            .labeled("IHT-1.05MUMAX"),
        AlgorithmEntry::new(Algorithm::Iht).with_stepsize(Stepsize::Niht { variant: NihtVariant::Uv }),
        AlgorithmEntry::new(Algorithm::Grad),
        AlgorithmEntry::new(Algorithm::Rgrad).with_retraction(Retraction::Projective),
        AlgorithmEntry::new(Algorithm::Rgrad).with_retraction(Retraction::Orthographic),
        AlgorithmEntry::new(Algorithm::Nag),
        AlgorithmEntry::new(Algorithm::Narg),
        AlgorithmEntry::new(Algorithm::NargRestart),
    ]
}

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    run_with_plugins(cfg, &[])
}

/// Per-label agreement of fitted and predicted rates: the median over seeds
/// of the signed deviation, or with `every_seed` the largest deviation.
pub fn rate_check(runs: &[TraceRun], label: &str, tol: f64, every_seed: bool) -> Check {
    let devs: Vec<f64> = runs
        .iter()
        .filter(|r| r.label == label)
        .map(|r| match (r.fitted(), r.predicted_rate) {
            (Some(f), Some(p)) => f - p,
            _ => f64::NAN,
        })
        .collect();
    let missing = devs.iter().filter(|d| d.is_nan()).count();
    let (stat, what) = if every_seed {
        (devs.iter().fold(0.0_f64, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d.abs()) }), "max")
    } else {
        (median(&devs).map_or(f64::INFINITY, f64::abs), "|median|")
    };
    let name = if every_seed { format!("rate_{label}_every_seed") } else { format!("rate_{label}") };
    Check::new(
        &name,
        !devs.is_empty() && missing == 0 && stat <= tol,
        format!("{what} fitted - predicted = {stat:e} over {} seeds ({missing} without a rate), tolerance {tol}", devs.len()),
    )
}

struct EntryKind {
    label: String,
    constant_mu: bool,
    lazy: bool,
    predicted: bool,
}

pub fn run_with_plugins(cfg: &ScenarioConfig, plugins: &[&dyn PluginSolver]) -> ScenarioOutcome {
    let inst_cfg = cfg.instance_or(default_instance());
    let seeds = cfg.seeds_or(&default_seeds());
    let entries = cfg.algorithms_or(default_algorithms());
    let params = &cfg.compare;
    let preps = prepare_all(&inst_cfg, &cfg.init, &seeds, true)?;
    let mut runs = run_grid(&preps, &entries, &params.stop)?;
    for plugin in plugins {
        runs.extend(preps.par_iter().map(|p| TraceRun {
            label: plugin.label(),
            seed: p.seed,
            trace: plugin
                .run(&p.instance, &p.x0)
                .unwrap_or_else(|e| super::failed_trace(&p.instance, Algorithm::Rgrad, &p.x0, e.to_string())),
            predicted_rate: None,
        }).collect::<Vec<_>>());
    }

    let mut result = ScenarioResult::new(ScenarioKind::Compare);
    result.reports = preps.iter().filter_map(|p| Some(SeedReport { seed: p.seed, report: p.report.clone()? })).collect();
    let analyzed = preps.iter().all(|p| p.report.as_ref().is_some_and(|r| r.is_identifiable()));

    let kinds: Vec<EntryKind> = entries
        .iter()
        .map(|e| {
            let c = entry_config(e, &params.stop, &preps[0])?;
            Ok(EntryKind {
                label: e.label(),
                constant_mu: matches!(c.stepsize, Stepsize::Constant { .. }) && !c.algorithm.takes_momentum(),
                lazy: c.algorithm.takes_momentum() && matches!(c.momentum, Momentum::Lazy { .. }),
                predicted: runs.iter().any(|r| r.label == e.label() && r.predicted_rate.is_some()),
            })
        })
        .collect::<Result<_, ScenarioError>>()?;

    if analyzed {
        for k in &kinds {
            // Lazy-momentum predictions depend on the stopping time; they are
            // reported, not asserted.
            if !k.predicted || k.lazy {
                continue;
            }
            let beyond_bound = runs
                .iter()
                .filter(|r| r.label == k.label)
                .any(|r| r.predicted_rate.is_some_and(|p| p >= 1.0));
            if beyond_bound {
                let all_diverged = runs
                    .iter()
                    .filter(|r| r.label == k.label)
                    .all(|r| matches!(r.trace.status, TerminalStatus::Diverged { .. }));
                result.checks.push(Check::new(
                    &format!("diverges_{}", k.label),
                    all_diverged,
                    "predicted rate at least one; every seed must diverge",
                ));
                continue;
            }
            result.checks.push(rate_check(&runs, &k.label, params.rate_tolerance, false));
            if k.constant_mu {
                result.checks.push(rate_check(&runs, &k.label, params.rate_tolerance, true));
            }
        }
    }

    let median_iters = |label: &str| {
        median(&runs.iter().filter(|r| r.label == label).map(|r| r.trace.iterations() as f64).collect::<Vec<_>>())
    };
    let restart_labels: Vec<&str> =
        runs.iter().filter(|r| r.trace.algorithm == Algorithm::NargRestart).map(|r| r.label.as_str()).collect();
    let lazy_narg = kinds.iter().find(|k| k.lazy && entries.iter().any(|e| e.label() == k.label && e.algorithm == Algorithm::Narg));
    if let (Some(rl), Some(lazy)) = (restart_labels.first(), lazy_narg) {
        let (a, b) = (median_iters(rl), median_iters(&lazy.label));
        result.checks.push(Check::new(
            "restart_not_slower_than_lazy",
            matches!((a, b), (Some(a), Some(b)) if a <= b),
            format!("median iterations {rl}: {a:?}, {}: {b:?}", lazy.label),
        ));
    }
    if !restart_labels.is_empty() {
        let mut table = Table::new("restart_tests", &["seed", "tests_checked", "sign_disagreements"]);
        let (mut total, mut bad) = (0, 0);
        for r in runs.iter().filter(|r| r.trace.algorithm == Algorithm::NargRestart) {
            let (n, d) = restart_sign_counts(&r.trace);
            total += n;
            bad += d;
            table.push(vec![r.seed.to_string(), n.to_string(), d.to_string()]);
        }
        result.checks.push(Check::new(
            "restart_sign_agreement",
            bad == 0 && total > 0,
            format!("{bad} disagreements among {total} restart tests in the basin"),
        ));
        result.tables.push(table);
    }

    if params.equivalence && analyzed {
        let (basin_runs, table, check) = equivalence(&preps, params.basin_offset, params.equivalence_tolerance, &params.stop)?;
        runs.extend(basin_runs);
        result.tables.push(table);
        result.checks.push(check);
    }

    let first = seeds[0];
    let stems: Vec<(String, String)> = runs
        .iter()
        .filter(|r| r.seed == first)
        .map(|r| (r.label.clone(), trace_stem(&r.label, r.seed)))
        .collect();
    result.plots.push(("residuals".into(), residual_plot(&format!("seeds {}; showing seed {first}", seed_list(&seeds)), &stems)));
    result.runs = runs;
    Ok(result)
}

/// Pairs whose linearizations around `X★` coincide.
pub const EQUIVALENT_PAIRS: [(&str, &str); 4] = [
    ("BASIN-GRAD", "BASIN-RGRAD-PROJ"),
    ("BASIN-GRAD", "BASIN-RGRAD-ORTH"),
    ("BASIN-NAG-QSTAR", "BASIN-NARG-QSTAR"),
    ("BASIN-NAG-LAZY2", "BASIN-NARG-LAZY2"),
];

fn basin_entries() -> Vec<AlgorithmEntry> {
    vec![
        AlgorithmEntry::new(Algorithm::Grad).labeled("BASIN-GRAD"),
        AlgorithmEntry::new(Algorithm::Rgrad).with_retraction(Retraction::Projective).labeled("BASIN-RGRAD-PROJ"),
        AlgorithmEntry::new(Algorithm::Rgrad).with_retraction(Retraction::Orthographic).labeled("BASIN-RGRAD-ORTH"),
        AlgorithmEntry::new(Algorithm::Nag).with_q_relative(1.0).labeled("BASIN-NAG-QSTAR"),
        AlgorithmEntry::new(Algorithm::Narg).with_q_relative(1.0).labeled("BASIN-NARG-QSTAR"),
        AlgorithmEntry::new(Algorithm::Nag).with_momentum(Momentum::Lazy { d: 2 }).labeled("BASIN-NAG-LAZY2"),
        AlgorithmEntry::new(Algorithm::Narg).with_momentum(Momentum::Lazy { d: 2 }).labeled("BASIN-NARG-LAZY2"),
    ]
}

/// Runs the Euclidean and Riemannian members of each pair from the same
/// start near `X★` and compares their fitted rates.
fn equivalence(
    preps: &[Prepared],
    offset: f64,
    tol: f64,
    stop: &StopRule,
) -> Result<(Vec<TraceRun>, Table, Check), ScenarioError> {
    let starts: Vec<Prepared> = preps
        .iter()
        .map(|p| Prepared { x0: basin_start(&p.instance, offset, p.seed), ..p.clone() })
        .collect();
    let runs = run_grid(&starts, &basin_entries(), stop)?;
    let mut table = Table::new("equivalence", &["seed", "euclidean", "riemannian", "euclidean_rate", "riemannian_rate", "abs_diff"]);
    let mut worst = 0.0_f64;
    for p in preps {
        for (a, b) in EQUIVALENT_PAIRS {
            let rate = |label: &str| {
                runs.iter().find(|r| r.seed == p.seed && r.label == label).and_then(|r| r.trace.fitted_rate())
            };
            let (ra, rb) = (rate(a), rate(b));
            let diff = match (ra, rb) {
                (Some(x), Some(y)) => (x - y).abs(),
                _ => f64::INFINITY,
            };
            worst = worst.max(diff);
            table.push(vec![
                p.seed.to_string(),
                a.into(),
                b.into(),
                ra.map(num).unwrap_or_default(),
                rb.map(num).unwrap_or_default(),
                num(diff),
            ]);
        }
    }
    let check = Check::new(
        "euclidean_riemannian_rates_agree",
        worst <= tol,
        format!("max |rate difference| = {worst:e} over {} seeds and {} pairs, tolerance {tol}", preps.len(), EQUIVALENT_PAIRS.len()),
    );
    Ok((runs, table, check))
}
