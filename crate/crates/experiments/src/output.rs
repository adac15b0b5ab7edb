//! Scenario results and their on-disk layout.
//!
//! ```text
//! <out>/summary.csv           one row per run
//! <out>/aggregate.csv         medians per label
//! <out>/reports.json          spectral report per seed, when computed
//! <out>/checks.json           scenario assertions
//! <out>/<table>.csv           scenario-specific tables
//! <out>/<plot>.gp             gnuplot scripts reading the CSV files
//! <out>/traces/<label>_seed<k>.csv          t,residual,loss,mu,eta,restart,wall_time_ns
//! <out>/traces/<label>_seed<k>.status.json  terminal status and restart tests
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lowrank::analysis::SpectralReport;
use lowrank::solvers::{Algorithm, IterationRecord, IterationTrace, RestartTest, TerminalStatus};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioKind;
use crate::summary::{aggregate, summarize, AggregateRow, SummaryRow, TraceRun};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Shortest round-trip decimal form, so output is reproducible bit for bit.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub report: SpectralReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: ScenarioKind,
    pub runs: Vec<TraceRun>,
    /// Run summaries for runs whose traces are not kept.
    pub extra_summary: Vec<SummaryRow>,
    pub reports: Vec<SeedReport>,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub plots: Vec<(String, String)>,
}

impl ScenarioResult {
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            runs: Vec::new(),
            extra_summary: Vec::new(),
            reports: Vec::new(),
            tables: Vec::new(),
            checks: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.runs.iter().map(summarize).chain(self.extra_summary.iter().cloned()).collect()
    }

    pub fn aggregate(&self) -> Vec<AggregateRow> {
        aggregate(&self.summary())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<(), OutputError> {
        create_dir(dir)?;
        if !self.runs.is_empty() {
            let traces = dir.join("traces");
            create_dir(&traces)?;
            for run in &self.runs {
                let stem = trace_stem(&run.label, run.seed);
                write_trace(&traces.join(format!("{stem}.csv")), &traces.join(format!("{stem}.status.json")), run)?;
            }
        }
        let summary = self.summary();
        if !summary.is_empty() {
            write_rows(&dir.join("summary.csv"), &summary)?;
            write_rows(&dir.join("aggregate.csv"), &aggregate(&summary))?;
        }
        if !self.reports.is_empty() {
            write_json(&dir.join("reports.json"), &self.reports)?;
        }
        for t in &self.tables {
            write_table(&dir.join(format!("{}.csv", t.name)), t)?;
        }
        write_json(&dir.join("checks.json"), &self.checks)?;
        for (name, script) in &self.plots {
            let path = dir.join(format!("{name}.gp"));
            fs::write(&path, script).map_err(|source| OutputError::Io { path, source })?;
        }
        Ok(())
    }
}

fn create_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })
}

/// File stem for a run: the label with anything but `[A-Za-z0-9-]` mapped to
/// `_`, then the seed.
pub fn trace_stem(label: &str, seed: u64) -> String {
    let clean: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    format!("{clean}_seed{seed}")
}

/// Terminal state of a run, stored next to its CSV trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub label: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub sigma_r: f64,
    pub predicted_rate: Option<f64>,
    #[serde(flatten)]
    pub status: TerminalStatus,
    pub restart_tests: Vec<RestartTest>,
}

pub fn write_trace(csv_path: &Path, sidecar_path: &Path, run: &TraceRun) -> Result<(), OutputError> {
    write_rows(csv_path, &run.trace.records)?;
    let sidecar = TraceSidecar {
        label: run.label.clone(),
        seed: run.seed,
        algorithm: run.trace.algorithm,
        sigma_r: run.trace.sigma_r,
        predicted_rate: run.predicted_rate,
        status: run.trace.status.clone(),
        restart_tests: run.trace.restart_tests.clone(),
    };
    write_json(sidecar_path, &sidecar)
}

pub fn read_trace(csv_path: &Path, sidecar_path: &Path) -> Result<TraceRun, OutputError> {
    let csv_err = |source| OutputError::Csv { path: csv_path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(csv_path).map_err(csv_err)?;
    let records: Vec<IterationRecord> =
        reader.deserialize().collect::<Result<_, _>>().map_err(csv_err)?;
    let text = fs::read_to_string(sidecar_path)
        .map_err(|source| OutputError::Io { path: sidecar_path.to_path_buf(), source })?;
    let side: TraceSidecar = serde_json::from_str(&text)
        .map_err(|source| OutputError::Json { path: sidecar_path.to_path_buf(), source })?;
    Ok(TraceRun {
        label: side.label,
        seed: side.seed,
        predicted_rate: side.predicted_rate,
        trace: IterationTrace {
            algorithm: side.algorithm,
            records,
            restart_tests: side.restart_tests,
            status: side.status,
            sigma_r: side.sigma_r,
        },
    })
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, OutputError> {
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| OutputError::Json { path: path.to_path_buf(), source })?;
    fs::write(path, text + "\n").map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

/// Gnuplot script plotting residual against iteration for the given trace
/// stems, on a log scale.
pub fn residual_plot(title: &str, stems: &[(String, String)]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale y\n");
    s.push_str("set xlabel 'iteration'\nset ylabel '||X_t - X*||_F'\n");
    s.push_str(&format!("set title '{title}'\n"));
    let parts: Vec<String> = stems
        .iter()
        .map(|(title, stem)| format!("'traces/{stem}.csv' using 1:2 skip 1 with lines title '{title}'"))
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use lowrank::solvers::IterationRecord;

    fn sample_run() -> TraceRun {
        let records = (0..4)
            .map(|t| IterationRecord {
                t,
                residual: 0.3f64.powi(t as i32) * 1.1,
                loss: 0.1 / (t + 1) as f64,
                mu: if t == 0 { 0.0 } else { 1.0 / 3.0 },
                eta: 0.25,
                restart: t == 2,
                wall_time_ns: 100 * t as u64,
            })
            .collect();
        TraceRun {
            label: "NARG+R".into(),
            seed: 7,
            predicted_rate: Some(0.5),
            trace: IterationTrace {
                algorithm: Algorithm::NargRestart,
                records,
                restart_tests: vec![RestartTest { t: 2, euclidean: 1e-3, tangent: 9e-4 }],
                status: TerminalStatus::Converged { iterations: 3 },
                sigma_r: 0.7,
            },
        }
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let run = sample_run();
        let (c, s) = (dir.path().join("t.csv"), dir.path().join("t.status.json"));
        write_trace(&c, &s, &run).unwrap();
        let header = fs::read_to_string(&c).unwrap();
        assert!(header.starts_with("t,residual,loss,mu,eta,restart,wall_time_ns\n"));
        assert_eq!(read_trace(&c, &s).unwrap(), run);
    }

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(trace_stem("NARG+R", 3), "NARG_R_seed3");
        assert_eq!(trace_stem("RGRAD-PROJ", 0), "RGRAD-PROJ_seed0");
    }

    #[test]
    fn summary_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![summarize(&sample_run())];
        let path = dir.path().join("s.csv");
        write_rows(&path, &rows).unwrap();
        let back: Vec<SummaryRow> = read_rows(&path).unwrap();
        assert_eq!(back, rows);
    }
}
