//! A single solver run.

use lowrank::solvers::Algorithm;

use super::{default_instance, prepare, run_entry, ScenarioOutcome};
use crate::config::{AlgorithmEntry, ScenarioConfig, ScenarioKind};
use crate::output::{residual_plot, trace_stem, ScenarioResult, SeedReport};

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    let inst_cfg = cfg.instance_or(default_instance());
    let seed = cfg.seeds_or(&[0])[0];
    let entry = cfg.algorithms_or(vec![AlgorithmEntry::new(Algorithm::NargRestart)]).remove(0);
    let prep = prepare(&inst_cfg, &cfg.init, seed, entry.needs_analysis())?;
    let run = run_entry(&prep, &entry, &cfg.solve.stop)?;
    let mut result = ScenarioResult::new(ScenarioKind::Solve);
    if let Some(report) = prep.report {
        result.reports.push(SeedReport { seed, report });
    }
    result.plots.push(("residuals".into(), residual_plot(&run.label, &[(run.label.clone(), trace_stem(&run.label, seed))])));
    result.runs.push(run);
    Ok(result)
}
