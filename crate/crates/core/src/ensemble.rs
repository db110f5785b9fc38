//! Parallel execution of independent scenarios.
//!
//! A fixed pool of scoped threads pulls scenario indices from an atomic
//! counter. Each worker owns its column state; the only shared data are the
//! immutable scenario list and forcing. Per-scenario files are written as each
//! run completes and depend only on that scenario, so their bytes do not
//! depend on the worker count or completion order.

use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::engine::{run_column, RunOutput};
use crate::error::{Error, Result};
use crate::forcing::ClimateForcing;
use crate::output::{failure_summary, summary_path, write_outputs};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok {
        alt: f64,
        no_permafrost_table: bool,
        steps: usize,
    },
    /// The simulation failed.
    Failed(String),
    /// The simulation finished but its files could not be written.
    WriteFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStatus {
    pub name: String,
    pub outcome: Outcome,
}

/// Statuses in configuration order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub statuses: Vec<ScenarioStatus>,
}

impl EnsembleReport {
    pub fn all_ok(&self) -> bool {
        self.statuses.iter().all(|s| matches!(s.outcome, Outcome::Ok { .. }))
    }

    pub fn any_write_failure(&self) -> bool {
        self.statuses.iter().any(|s| matches!(s.outcome, Outcome::WriteFailed(_)))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.statuses {
            let _ = match &s.outcome {
                Outcome::Ok { alt, no_permafrost_table, steps } => writeln!(
                    out,
                    "{} ok alt_m={alt:.16e} no_permafrost_table={no_permafrost_table} steps={steps}",
                    s.name
                ),
                Outcome::Failed(m) => writeln!(out, "{} failed {}", s.name, first_line(m)),
                Outcome::WriteFailed(m) => writeln!(out, "{} write-failed {}", s.name, first_line(m)),
            };
        }
        out
    }
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}

/// Fails early if `dir` cannot be created or written.
pub fn check_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".cryoflow-write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

/// Runs every scenario with up to `workers` threads, writing per-scenario
/// files into `out` and an `ensemble.txt` status list at the end.
pub fn run_ensemble(
    scenarios: &[ScenarioConfig<f64>],
    forcing: &ClimateForcing<f64>,
    workers: usize,
    out: &Path,
    plot_scripts: bool,
) -> Result<EnsembleReport> {
    if workers == 0 {
        return Err(Error::InvalidArgument("worker count must be >= 1".into()));
    }
    check_writable(out)?;
    let results = run_all(scenarios, workers, |scenario| {
        let outcome = match run_column(scenario, forcing) {
            Ok(run) => finish(out, scenario, &run, plot_scripts),
            Err(err) => {
                let message = err.to_string();
                match fs::write(summary_path(out, &scenario.name), failure_summary(&scenario.name, &err)) {
                    Ok(()) => Outcome::Failed(message),
                    Err(io) => Outcome::WriteFailed(format!("{message}; {io}")),
                }
            }
        };
        ScenarioStatus { name: scenario.name.clone(), outcome }
    });
    let report = EnsembleReport { statuses: results };
    fs::write(out.join("ensemble.txt"), report.to_text())?;
    Ok(report)
}

fn finish(out: &Path, scenario: &ScenarioConfig<f64>, run: &RunOutput<f64>, plot: bool) -> Outcome {
    match write_outputs(out, scenario, run, plot) {
        Ok(()) => Outcome::Ok {
            alt: run.alt.thickness,
            no_permafrost_table: run.alt.no_permafrost_table,
            steps: run.series.len(),
        },
        Err(e) => Outcome::WriteFailed(e.to_string()),
    }
}

/// Applies `job` to every scenario on a pool of `workers` threads and returns
/// the statuses in input order. A panicking job marks only its own scenario
/// as failed.
pub fn run_all<F>(scenarios: &[ScenarioConfig<f64>], workers: usize, job: F) -> Vec<ScenarioStatus>
where
    F: Fn(&ScenarioConfig<f64>) -> ScenarioStatus + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ScenarioStatus>>> = Mutex::new(vec![None; scenarios.len()]);
    let workers = workers.clamp(1, scenarios.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(scenario) = scenarios.get(i) else { break };
                let status = catch_unwind(AssertUnwindSafe(|| job(scenario))).unwrap_or_else(|panic| {
                    let message = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "unknown panic".into());
                    ScenarioStatus {
                        name: scenario.name.clone(),
                        outcome: Outcome::Failed(format!("panic: {message}")),
                    }
                });
                slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(status);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|p| p.into_inner())
        .into_iter()
        .map(|s| s.expect("every index is claimed by exactly one worker"))
        .collect()
}
