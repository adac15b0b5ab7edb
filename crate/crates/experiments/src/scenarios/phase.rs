//! Recovery success rate over a rank-by-sampling grid.

use lowrank::manifold::Retraction;
use lowrank::operators::{generate_instance, MeasurementKind};
use lowrank::solvers::Algorithm;
use rayon::prelude::*;

use super::{failed_trace, initial_point, run_entry, Prepared, ScenarioOutcome};
use crate::config::{AlgorithmEntry, InstanceConfig, PhaseParams, ScenarioConfig, ScenarioKind};
use crate::output::{num, Check, ScenarioResult, Table};
use crate::stats::monotonicity_violations;
use crate::summary::{summarize, TraceRun};

/// Success rate that counts a cell as inside the recovery region.
pub const REGION_THRESHOLD: f64 = 0.5;
/// Monotonicity violations tolerated per row and per column.
pub const ALLOWED_VIOLATIONS: usize = 1;
/// Baseline cells the restart region may miss.
pub const ALLOWED_MISSING_CELLS: usize = 2;

pub fn default_algorithms() -> Vec<AlgorithmEntry> {
    vec![
        AlgorithmEntry::new(Algorithm::Rgrad).with_retraction(Retraction::Orthographic),
        AlgorithmEntry::new(Algorithm::NargRestart),
    ]
}

pub fn cell_instance(kind: MeasurementKind, n: usize, r: usize, sampling: f64) -> InstanceConfig {
    match kind {
        MeasurementKind::Completion => InstanceConfig::completion(n, r, sampling),
        MeasurementKind::Sensing => InstanceConfig::sensing(n, r, ((sampling * (n * n) as f64).round() as usize).max(1)),
    }
}

pub fn trial_seed(base: u64, p: &PhaseParams, ri: usize, si: usize, trial: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add((((ri * p.samplings.len()) + si) * p.trials + trial) as u64)
}

/// Success rates indexed `[rank][sampling]`.
pub type Grid = Vec<Vec<f64>>;

/// Row and column monotonicity violations of a success grid: rates should
/// not fall as sampling grows or rise as rank grows.
pub fn grid_violations(grid: &Grid) -> (usize, usize) {
    let rows = grid.iter().map(|row| monotonicity_violations(row, true)).max().unwrap_or(0);
    let cols = (0..grid.first().map_or(0, Vec::len))
        .map(|j| monotonicity_violations(&grid.iter().map(|row| row[j]).collect::<Vec<_>>(), false))
        .max()
        .unwrap_or(0);
    (rows, cols)
}

/// Cells inside `base`'s region but outside `other`'s.
pub fn missing_cells(base: &Grid, other: &Grid) -> usize {
    base.iter()
        .zip(other)
        .flat_map(|(a, b)| a.iter().zip(b))
        .filter(|(a, b)| **a >= REGION_THRESHOLD && **b < REGION_THRESHOLD)
        .count()
}

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    let p = &cfg.phase;
    let kind = cfg.instance.as_ref().map_or(MeasurementKind::Completion, |i| i.kind);
    let base = cfg.seeds_or(&[0])[0];
    let entries = cfg.algorithms_or(default_algorithms());
    let labels: Vec<String> = entries.iter().map(|e| e.label()).collect();

    let trials: Vec<(usize, usize, usize)> = (0..p.ranks.len())
        .flat_map(|ri| (0..p.samplings.len()).flat_map(move |si| (0..p.trials).map(move |t| (ri, si, t))))
        .collect();
    let outcomes: Vec<Vec<TraceRun>> = trials
        .par_iter()
        .map(|&(ri, si, t)| {
            let inst_cfg = cell_instance(kind, p.n, p.ranks[ri], p.samplings[si]);
            let seed = trial_seed(base, p, ri, si, t);
            let instance = generate_instance(&inst_cfg.spec(seed))?;
            let cell = format!("r{}-s{}", p.ranks[ri], p.samplings[si]);
            match initial_point(&instance, &cfg.init, seed) {
                Ok(x0) => {
                    let prep = Prepared { seed, instance, x0, report: None };
                    entries
                        .iter()
                        .map(|e| {
                            let mut run = run_entry(&prep, e, &p.stop)?;
                            run.label = format!("{}-{cell}", run.label);
                            Ok(run)
                        })
                        .collect()
                }
                Err(e) => {
                    // No starting point: every method fails this trial.
                    let (n1, n2) = instance.shape();
                    let zero = lowrank::DenseMatrix::zeros(n1, n2);
                    Ok(entries
                        .iter()
                        .map(|entry| TraceRun {
                            label: format!("{}-{cell}", entry.label()),
                            seed,
                            trace: failed_trace(&instance, entry.algorithm, &zero, e.to_string()),
                            predicted_rate: None,
                        })
                        .collect())
                }
            }
        })
        .collect::<super::Result<_>>()?;

    let success = |run: &TraceRun| run.trace.final_residual() <= p.success_threshold;
    let mut counts = vec![vec![vec![0usize; p.samplings.len()]; p.ranks.len()]; entries.len()];
    for (&(ri, si, _), runs) in trials.iter().zip(&outcomes) {
        for (k, run) in runs.iter().enumerate() {
            if success(run) {
                counts[k][ri][si] += 1;
            }
        }
    }
    let grids: Vec<Grid> = counts
        .iter()
        .map(|g| g.iter().map(|row| row.iter().map(|&c| c as f64 / p.trials as f64).collect()).collect())
        .collect();

    let mut result = ScenarioResult::new(ScenarioKind::Phase);
    for (k, label) in labels.iter().enumerate() {
        let grid = &grids[k];
        let mut table = Table::new(&format!("phase_{label}"), &["r", "sampling", "success_rate"]);
        let mut contour = Table::new(&format!("phase_contour_{label}"), &["r", "sampling"]);
        for (ri, &r) in p.ranks.iter().enumerate() {
            for (si, &s) in p.samplings.iter().enumerate() {
                table.push(vec![r.to_string(), num(s), num(grid[ri][si])]);
            }
            if let Some(si) = grid[ri].iter().position(|&v| v >= REGION_THRESHOLD) {
                contour.push(vec![r.to_string(), num(p.samplings[si])]);
            }
        }
        result.tables.push(table);
        result.tables.push(contour);
        let (rows, cols) = grid_violations(grid);
        result.checks.push(Check::new(
            &format!("monotone_{label}"),
            rows <= ALLOWED_VIOLATIONS && cols <= ALLOWED_VIOLATIONS,
            format!("worst row has {rows} violations, worst column {cols}"),
        ));
        if kind == MeasurementKind::Completion {
            if let Some(si) = p.samplings.iter().position(|&s| s >= 1.0) {
                let rates: Vec<f64> = grid.iter().map(|row| row[si]).collect();
                result.checks.push(Check::new(
                    &format!("full_sampling_succeeds_{label}"),
                    rates.iter().all(|&v| v == 1.0),
                    format!("success rates at sampling 1: {rates:?}"),
                ));
            }
        }
        result.plots.push((
            format!("phase_{label}"),
            format!(
                "set datafile separator ','\nset xlabel 'sampling'\nset ylabel 'rank'\nset view map\nset dgrid3d {} ,{}\n\
                 splot 'phase_{label}.csv' using 2:1:3 skip 1 with pm3d title '{label} success rate'\n",
                p.ranks.len(),
                p.samplings.len()
            ),
        ));
    }
    let base_k = entries.iter().position(|e| e.algorithm == Algorithm::Rgrad);
    let restart_k = entries.iter().position(|e| e.algorithm == Algorithm::NargRestart);
    if let (Some(b), Some(r)) = (base_k, restart_k) {
        let missing = missing_cells(&grids[b], &grids[r]);
        result.checks.push(Check::new(
            "restart_region_contains_baseline",
            missing <= ALLOWED_MISSING_CELLS,
            format!("{missing} cells inside the {} region are outside the {} region", labels[b], labels[r]),
        ));
    }

    let runs: Vec<TraceRun> = outcomes.into_iter().flatten().collect();
    if p.keep_traces {
        result.runs = runs;
    } else {
        result.extra_summary = runs.iter().map(summarize).collect();
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violations_and_containment() {
        let a: Grid = vec![vec![0.0, 0.5, 1.0], vec![0.0, 0.2, 0.9]];
        assert_eq!(grid_violations(&a), (0, 0));
        let b: Grid = vec![vec![0.0, 0.6, 0.4], vec![0.1, 0.2, 0.9]];
        assert_eq!(grid_violations(&b), (1, 1));
        assert_eq!(missing_cells(&a, &b), 1);
        assert_eq!(missing_cells(&b, &a), 0);
    }
}
