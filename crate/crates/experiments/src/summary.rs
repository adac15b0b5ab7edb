//! Per-run summaries and their aggregation by label.

use lowrank::solvers::{Algorithm, IterationTrace, TerminalStatus};
use serde::{Deserialize, Serialize};

use crate::stats::median;

/// One solver run inside a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRun {
    pub label: String,
    pub seed: u64,
    pub trace: IterationTrace,
    pub predicted_rate: Option<f64>,
}

impl TraceRun {
    pub fn fitted(&self) -> Option<f64> {
        self.trace.post_basin_rate().or_else(|| self.trace.fitted_rate())
    }
}

pub fn status_name(status: &TerminalStatus) -> &'static str {
    match status {
        TerminalStatus::Converged { .. } => "converged",
        TerminalStatus::MaxIters => "max_iters",
        TerminalStatus::Diverged { .. } => "diverged",
        TerminalStatus::Error { .. } => "error",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub status: String,
    pub iterations: usize,
    pub final_residual: f64,
    pub fitted_rate: Option<f64>,
    pub post_basin_rate: Option<f64>,
    pub predicted_rate: Option<f64>,
    pub basin_entry: Option<usize>,
    pub restarts: usize,
    pub wall_time_ns: u64,
}

pub fn summarize(run: &TraceRun) -> SummaryRow {
    let t = &run.trace;
    SummaryRow {
        label: run.label.clone(),
        algorithm: t.algorithm,
        seed: run.seed,
        status: status_name(&t.status).to_string(),
        iterations: t.iterations(),
        final_residual: t.final_residual(),
        fitted_rate: t.fitted_rate(),
        post_basin_rate: t.post_basin_rate(),
        predicted_rate: run.predicted_rate,
        basin_entry: t.basin_entry(),
        restarts: t.restart_count(),
        wall_time_ns: t.records.last().map_or(0, |r| r.wall_time_ns),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub label: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub converged: usize,
    pub median_iterations: Option<f64>,
    pub median_fitted_rate: Option<f64>,
    pub median_predicted_rate: Option<f64>,
    /// Median over runs of `fitted − predicted`, using the post-basin rate.
    pub median_rate_error: Option<f64>,
    pub median_wall_time_ns: Option<f64>,
}

/// Groups rows by label in order of first appearance.
pub fn aggregate(rows: &[SummaryRow]) -> Vec<AggregateRow> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let group: Vec<&SummaryRow> = rows.iter().filter(|r| r.label == label).collect();
            let col = |f: &dyn Fn(&SummaryRow) -> Option<f64>| -> Vec<f64> { group.iter().filter_map(|r| f(r)).collect() };
            let fitted = |r: &SummaryRow| r.post_basin_rate.or(r.fitted_rate);
            AggregateRow {
                label: label.to_string(),
                algorithm: group[0].algorithm,
                runs: group.len(),
                converged: group.iter().filter(|r| r.status == "converged").count(),
                median_iterations: median(&col(&|r| Some(r.iterations as f64))),
                median_fitted_rate: median(&col(&fitted)),
                median_predicted_rate: median(&col(&|r| r.predicted_rate)),
                median_rate_error: median(&col(&|r| Some(fitted(r)? - r.predicted_rate?))),
                median_wall_time_ns: median(&col(&|r| Some(r.wall_time_ns as f64))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(label: &str, iterations: usize, fitted: Option<f64>, predicted: Option<f64>) -> SummaryRow {
        SummaryRow {
            label: label.into(),
            algorithm: Algorithm::Rgrad,
            seed: 0,
            status: "converged".into(),
            iterations,
            final_residual: 1e-12,
            fitted_rate: fitted,
            post_basin_rate: fitted,
            predicted_rate: predicted,
            basin_entry: Some(1),
            restarts: 0,
            wall_time_ns: 10,
        }
    }

    #[test]
    fn aggregation_keeps_label_order_and_medians() {
        let rows = vec![
            row("B", 10, Some(0.5), Some(0.4)),
            row("A", 3, None, None),
            row("B", 20, Some(0.7), Some(0.4)),
            row("B", 30, Some(0.6), Some(0.4)),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].label, "B");
        assert_eq!(agg[0].runs, 3);
        assert_eq!(agg[0].median_iterations, Some(20.0));
        assert_eq!(agg[0].median_fitted_rate, Some(0.6));
        assert!((agg[0].median_rate_error.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(agg[1].median_fitted_rate, None);
    }
}
