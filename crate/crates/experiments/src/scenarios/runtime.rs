//! Iteration counts and wall time of Riemannian gradient descent against
//! adaptive restart over an `(n, r, p)` grid, and the growth of per-step
//! cost with `n`.

use std::time::Instant;

use lowrank::manifold::Retraction;
use lowrank::solvers::{self, Algorithm, SolverConfig};

use super::{prepare, prepare_all, run_grid, ScenarioOutcome};
use crate::config::{AlgorithmEntry, InitConfig, InstanceConfig, RuntimeCell, ScenarioConfig, ScenarioKind};
use crate::output::{num, opt, Check, ScenarioResult, Table};
use crate::stats::{loglog_slope, mean, median};
use crate::summary::TraceRun;

pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

pub const BASELINE: &str = "RGRAD-ORTH";

pub fn default_algorithms() -> Vec<AlgorithmEntry> {
    vec![
        AlgorithmEntry::new(Algorithm::Rgrad).with_retraction(Retraction::Orthographic),
        AlgorithmEntry::new(Algorithm::NargRestart),
    ]
}

struct CellResult {
    cell: RuntimeCell,
    runs: Vec<TraceRun>,
    complete: bool,
}

fn median_iterations(runs: &[TraceRun], label: &str) -> Option<f64> {
    median(&runs.iter().filter(|r| r.label == label).map(|r| r.trace.iterations() as f64).collect::<Vec<_>>())
}

/// Median wall time per step of `steps` iterations of `algorithm` on an
/// `n × n` completion instance.
pub fn median_step_ns(algorithm: Algorithm, n: usize, r: usize, p: f64, steps: usize, seed: u64) -> super::Result<f64> {
    let prep = prepare(&InstanceConfig::completion(n, r, p), &InitConfig::Spectral, seed, false)?;
    let cfg = SolverConfig::new(algorithm).with_max_iters(steps).with_stop_tol(0.0);
    let trace = solvers::run(&prep.instance, &cfg, &prep.x0)?;
    let times: Vec<f64> = trace.step_times_ns().into_iter().map(|t| t as f64).collect();
    Ok(median(&times).unwrap_or(f64::NAN))
}

pub fn run(cfg: &ScenarioConfig) -> ScenarioOutcome {
    let p = &cfg.runtime;
    let seeds = cfg.seeds_or(&default_seeds());
    let entries = cfg.algorithms_or(default_algorithms());
    let labels: Vec<String> = entries.iter().map(|e| e.label()).collect();
    let mut result = ScenarioResult::new(ScenarioKind::Runtime);

    let mut cells = Vec::new();
    for &cell in &p.cells {
        let start = Instant::now();
        let inst_cfg = InstanceConfig::completion(cell.n, cell.r, cell.p);
        let preps = prepare_all(&inst_cfg, &cfg.init, &seeds, false)?;
        let runs = run_grid(&preps, &entries, &p.stop)?;
        let complete = start.elapsed().as_secs_f64() <= p.cell_timeout_secs;
        cells.push(CellResult { cell, runs, complete });
    }

    let mut table = Table::new(
        "runtime",
        &["n", "r", "p", "algorithm", "mean_iterations", "median_iterations", "mean_wall_time_s", "converged", "complete"],
    );
    for c in &cells {
        for label in &labels {
            let group: Vec<&TraceRun> = c.runs.iter().filter(|r| &r.label == label).collect();
            let iters: Vec<f64> = group.iter().map(|r| r.trace.iterations() as f64).collect();
            let walls: Vec<f64> =
                group.iter().map(|r| r.trace.records.last().map_or(0.0, |x| x.wall_time_ns as f64 * 1e-9)).collect();
            table.push(vec![
                c.cell.n.to_string(),
                c.cell.r.to_string(),
                num(c.cell.p),
                label.clone(),
                opt(mean(&iters)),
                opt(median(&iters)),
                opt(mean(&walls)),
                group.iter().filter(|r| r.trace.status.is_converged()).count().to_string(),
                c.complete.to_string(),
            ]);
        }
    }

    let restart = entries.iter().find(|e| e.algorithm == Algorithm::NargRestart).map(|e| e.label());
    let incomplete: Vec<String> =
        cells.iter().filter(|c| !c.complete).map(|c| format!("({}, {}, {})", c.cell.n, c.cell.r, c.cell.p)).collect();
    if let (Some(rl), true) = (restart, labels.iter().any(|l| l == BASELINE)) {
        let mut detail = Vec::new();
        let mut ok = incomplete.is_empty();
        for c in cells.iter() {
            let (a, b) = (median_iterations(&c.runs, &rl), median_iterations(&c.runs, BASELINE));
            ok &= matches!((a, b), (Some(a), Some(b)) if a < b);
            detail.push(format!("({}, {}, {}): {} vs {}", c.cell.n, c.cell.r, c.cell.p, opt(a), opt(b)));
        }
        if !incomplete.is_empty() {
            detail.push(format!("incomplete cells: {}", incomplete.join(" ")));
        }
        result.checks.push(Check::new("restart_fewer_iterations", ok, detail.join("; ")));
    }

    // Larger sampling at fixed (n, r) needs fewer iterations.
    let mut trend_ok = true;
    let mut trend = Vec::new();
    for label in &labels {
        for a in &cells {
            for b in &cells {
                if a.cell.n == b.cell.n && a.cell.r == b.cell.r && a.cell.p < b.cell.p {
                    let (ma, mb) = (median_iterations(&a.runs, label), median_iterations(&b.runs, label));
                    trend_ok &= matches!((ma, mb), (Some(x), Some(y)) if y < x);
                    trend.push(format!("{label} n={} r={}: p={} {} -> p={} {}", a.cell.n, a.cell.r, a.cell.p, opt(ma), b.cell.p, opt(mb)));
                }
            }
        }
    }
    if !trend.is_empty() {
        result.checks.push(Check::new("larger_sampling_fewer_iterations", trend_ok, trend.join("; ")));
    }

    // Doubling n at fixed r/n and p leaves the iteration count stable.
    let mut size_ok = true;
    let mut sizes = Vec::new();
    for label in &labels {
        for a in &cells {
            for b in &cells {
                if b.cell.n == 2 * a.cell.n && b.cell.r == 2 * a.cell.r && a.cell.p == b.cell.p {
                    let (ma, mb) = (median_iterations(&a.runs, label), median_iterations(&b.runs, label));
                    let rel = match (ma, mb) {
                        (Some(x), Some(y)) if x > 0.0 => (y - x).abs() / x,
                        _ => f64::INFINITY,
                    };
                    size_ok &= rel <= p.size_tolerance;
                    sizes.push(format!("{label} p={}: n={} {} -> n={} {} ({rel:.3})", a.cell.p, a.cell.n, opt(ma), b.cell.n, opt(mb)));
                }
            }
        }
    }
    if !sizes.is_empty() {
        result.checks.push(Check::new("iterations_stable_in_size", size_ok, sizes.join("; ")));
    }

    if !p.complexity_sizes.is_empty() {
        // Timed one at a time so the steps do not compete for cores.
        let mut cost = Table::new("step_cost", &["n", "algorithm", "median_step_ns"]);
        let mut slope = |alg: Algorithm| -> super::Result<Option<f64>> {
            let mut ys = Vec::new();
            for &n in &p.complexity_sizes {
                let t = median_step_ns(alg, n, p.complexity_rank, p.complexity_sampling, p.complexity_steps, seeds[0])?;
                cost.push(vec![n.to_string(), alg.name().into(), num(t)]);
                ys.push(t);
            }
            let xs: Vec<f64> = p.complexity_sizes.iter().map(|&n| n as f64).collect();
            Ok(loglog_slope(&xs, &ys))
        };
        let rgrad = slope(Algorithm::Rgrad)?;
        let grad = slope(Algorithm::Grad)?;
        result.checks.push(Check::new(
            "rgrad_step_cost_exponent",
            rgrad.is_some_and(|s| s <= p.rgrad_max_exponent),
            format!("fitted exponent {} (at most {})", opt(rgrad), p.rgrad_max_exponent),
        ));
        result.checks.push(Check::new(
            "grad_step_cost_exponent",
            grad.is_some_and(|s| s >= p.grad_min_exponent),
            format!("fitted exponent {} (at least {})", opt(grad), p.grad_min_exponent),
        ));
        result.tables.push(cost);
    }

    result.tables.push(table);
    // Labels carry the cell so trace files do not collide.
    result.runs = cells
        .into_iter()
        .flat_map(|c| {
            c.runs.into_iter().map(move |mut r| {
                r.label = format!("{}-n{}-r{}-p{}", r.label, c.cell.n, c.cell.r, c.cell.p);
                r
            })
        })
        .collect();
    Ok(result)
}
