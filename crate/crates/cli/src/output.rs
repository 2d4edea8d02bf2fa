use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use alslq::{MethodRun, MpcResult, MpcSummary};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    SolverAbort,
    TaskFailure,
}

impl Status {
    pub fn of(result: &MpcResult, tolerance: f64) -> Self {
        let s = &result.summary;
        if s.aborted {
            Status::SolverAbort
        } else if !s.completed || s.max_applied_violation > tolerance {
            Status::TaskFailure
        } else {
            Status::Success
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::SolverAbort => 3,
            Status::TaskFailure => 4,
        }
    }
}

fn csv_file(path: &Path, hash: &str) -> io::Result<csv::Writer<File>> {
    let mut f = File::create(path)?;
    writeln!(f, "# config-hash: {hash}")?;
    Ok(csv::Writer::from_writer(f))
}

fn flush(mut w: csv::Writer<File>) -> io::Result<()> {
    w.flush()
}

pub fn write_metrics(path: &Path, hash: &str, result: &MpcResult) -> io::Result<()> {
    let mut w = csv_file(path, hash)?;
    w.write_record([
        "iteration",
        "sim_time",
        "cost",
        "violation_l2",
        "max_violation",
        "gamma",
        "solve_ms",
    ])?;
    for m in &result.metrics {
        w.write_record(&[
            m.iteration.to_string(),
            m.sim_time.to_string(),
            m.cost.to_string(),
            m.violation_l2.to_string(),
            m.max_violation.to_string(),
            m.gamma.to_string(),
            m.solve_ms.to_string(),
        ])?;
    }
    flush(w)
}

pub fn write_dual(path: &Path, hash: &str, result: &MpcResult) -> io::Result<()> {
    let mut w = csv_file(path, hash)?;
    w.write_record([
        "iteration",
        "sim_time",
        "max_nu",
        "applied_max_violation",
        "riccati_passes",
        "dual_updates",
    ])?;
    for m in &result.metrics {
        w.write_record(&[
            m.iteration.to_string(),
            m.sim_time.to_string(),
            m.max_nu.to_string(),
            m.applied_max_violation.to_string(),
            m.riccati_passes.to_string(),
            m.dual_updates.to_string(),
        ])?;
    }
    flush(w)
}

pub fn write_trajectory(path: &Path, hash: &str, result: &MpcResult) -> io::Result<()> {
    let mut w = csv_file(path, hash)?;
    let nx = result.states.dim();
    let nu = result.inputs.dim();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..nx).map(|i| format!("x{i}")))
        .chain((0..nu).map(|i| format!("u{i}")))
        .collect();
    w.write_record(&header)?;
    for (i, t) in result.states.grid().nodes().iter().enumerate() {
        let row: Vec<String> = std::iter::once(t.to_string())
            .chain(result.states.value(i).iter().map(f64::to_string))
            .chain(result.inputs.value(i).iter().map(f64::to_string))
            .collect();
        w.write_record(&row)?;
    }
    flush(w)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config_hash: &'a str,
    task: &'static str,
    method: String,
    status: Status,
    abort_reason: Option<&'a str>,
    warnings: &'a [String],
    dual: Option<alslq::DualUpdateConfig>,
    summary: &'a MpcSummary,
    config: &'a ExperimentConfig,
}

/// Writes the four per-run artifacts into `dir`.
pub fn write_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    hash: &str,
    method: &str,
    mpc: &alslq::MpcConfig,
    result: &MpcResult,
) -> io::Result<Status> {
    fs::create_dir_all(dir)?;
    write_metrics(&dir.join("metrics.csv"), hash, result)?;
    write_trajectory(&dir.join("trajectory.csv"), hash, result)?;
    write_dual(&dir.join("dual.csv"), hash, result)?;
    let status = Status::of(result, cfg.violation_tolerance);
    let summary = RunSummary {
        config_hash: hash,
        task: cfg.task.name(),
        method: method.to_string(),
        status,
        abort_reason: result.abort_reason.as_deref(),
        warnings: &result.warnings,
        dual: mpc.dual_config(),
        summary: &result.summary,
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(status)
}

#[derive(Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub kind: &'static str,
    pub status: Status,
    pub error: Option<String>,
    pub completed: bool,
    pub completion_time: Option<f64>,
    pub mean_violation_l2: f64,
    pub peak_violation_l2: f64,
    pub max_applied_violation: f64,
    pub mean_solve_ms: f64,
    pub p95_solve_ms: f64,
    pub final_cost: f64,
    pub steady_state_cost: f64,
}

impl ComparisonRow {
    pub fn new(run: &MethodRun, tolerance: f64) -> Self {
        let kind = run.config.strategy.kind.name();
        match &run.result {
            Ok(r) => {
                let s = &r.summary;
                ComparisonRow {
                    method: run.name.clone(),
                    kind,
                    status: Status::of(r, tolerance),
                    error: r.abort_reason.clone(),
                    completed: s.completed,
                    completion_time: s.completion_time,
                    mean_violation_l2: s.mean_violation_l2,
                    peak_violation_l2: s.peak_violation_l2,
                    max_applied_violation: s.max_applied_violation,
                    mean_solve_ms: s.mean_solve_ms,
                    p95_solve_ms: s.p95_solve_ms,
                    final_cost: s.final_cost,
                    steady_state_cost: s.steady_state_cost,
                }
            }
            Err(e) => ComparisonRow {
                method: run.name.clone(),
                kind,
                status: Status::SolverAbort,
                error: Some(e.to_string()),
                completed: false,
                completion_time: None,
                mean_violation_l2: f64::NAN,
                peak_violation_l2: f64::NAN,
                max_applied_violation: f64::NAN,
                mean_solve_ms: f64::NAN,
                p95_solve_ms: f64::NAN,
                final_cost: f64::NAN,
                steady_state_cost: f64::NAN,
            },
        }
    }
}

/// Per-tick violation norm of every method side by side.
pub fn write_aligned_violation(path: &Path, hash: &str, runs: &[MethodRun]) -> io::Result<()> {
    let mut w = csv_file(path, hash)?;
    let header: Vec<String> = ["iteration".to_string(), "sim_time".to_string()]
        .into_iter()
        .chain(runs.iter().map(|r| r.name.clone()))
        .collect();
    w.write_record(&header)?;
    let metrics: Vec<&[alslq::TickMetrics]> = runs
        .iter()
        .map(|r| r.result.as_ref().map(|r| r.metrics.as_slice()).unwrap_or(&[]))
        .collect();
    let ticks = metrics.iter().map(|m| m.len()).max().unwrap_or(0);
    let period = 1.0 / runs[0].config.mpc_rate;
    for k in 0..ticks {
        let mut row = vec![k.to_string(), (k as f64 * period).to_string()];
        row.extend(
            metrics
                .iter()
                .map(|m| m.get(k).map(|t| t.violation_l2.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    flush(w)
}

#[derive(Serialize)]
struct ComparisonReport<'a> {
    config_hash: &'a str,
    task: &'static str,
    /// Method labels from lowest to highest mean violation norm.
    ranking_by_violation: Vec<&'a str>,
    rows: &'a [ComparisonRow],
    config: &'a ExperimentConfig,
}

pub fn write_comparison(
    dir: &Path,
    cfg: &ExperimentConfig,
    hash: &str,
    runs: &[MethodRun],
    rows: &[ComparisonRow],
) -> io::Result<()> {
    write_aligned_violation(&dir.join("comparison.csv"), hash, runs)?;
    let report = ComparisonReport {
        config_hash: hash,
        task: cfg.task.name(),
        ranking_by_violation: alslq::mpc::order_by_violation(runs)
            .into_iter()
            .map(|i| runs[i].name.as_str())
            .collect(),
        rows,
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&report).map_err(io::Error::other)?;
    fs::write(dir.join("comparison.json"), json + "\n")
}
