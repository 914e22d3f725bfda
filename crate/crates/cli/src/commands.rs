use std::fs;
use std::path::Path;

use cwbc_core::simkit::{simulate, sweep, RunSummary};
use cwbc_core::validation::{run_all, Faults};

use crate::config::{load_scenario, ConfigError};
use crate::format::g9;
use crate::output::{summary_text, sweep_csv_name, sweep_report, write_csv_file};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Unreadable or invalid configuration, or unusable output directory.
    ConfigError,
    /// A run blew up or hit a numerical failure; partial output is written.
    Diverged,
    /// `validate` found failing criteria.
    CriteriaFailed,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::ConfigError => 1,
            Outcome::Diverged => 2,
            Outcome::CriteriaFailed => 3,
        }
    }
}

pub const THREADS_ENV: &str = "CWBC_THREADS";

/// Sweep worker count from `CWBC_THREADS`; unset or 0 means sequential.
pub fn threads_from_env() -> Result<usize, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => v.trim().parse::<usize>().map(|n| n.max(1)).map_err(|_| ConfigError::Invalid {
            key: THREADS_ENV.into(),
            message: format!("must be a non-negative integer, got `{v}`"),
        }),
    }
}

fn prepare(out: &Path) -> Result<(), Outcome> {
    fs::create_dir_all(out).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", out.display());
        Outcome::ConfigError
    })
}

fn io_failure(path: &Path, e: std::io::Error) -> Outcome {
    eprintln!("error: cannot write {}: {e}", path.display());
    Outcome::ConfigError
}

fn config_failure(e: ConfigError) -> Outcome {
    eprintln!("config error: {e}");
    Outcome::ConfigError
}

pub fn cmd_run(config: &Path, out: &Path) -> Outcome {
    let scenario = match load_scenario(config) {
        Ok(s) => s,
        Err(e) => return config_failure(e),
    };
    if let Err(o) = prepare(out) {
        return o;
    }
    let log = match simulate(&scenario) {
        Ok(log) => log,
        Err(e) => {
            eprintln!("runtime error: {e}");
            return Outcome::Diverged;
        }
    };
    let csv = out.join("timeseries.csv");
    if let Err(e) = write_csv_file(&log, &csv) {
        return io_failure(&csv, e);
    }
    let summary = RunSummary::from_log(&log);
    let path = out.join("summary.txt");
    if let Err(e) = fs::write(&path, summary_text(&summary, log.rows.len())) {
        return io_failure(&path, e);
    }
    match log.divergence {
        Some(d) => {
            eprintln!(
                "diverged at t = {} s (joint speed {} rad/s); partial log written",
                g9(d.time),
                g9(d.speed)
            );
            Outcome::Diverged
        }
        None => {
            println!(
                "k_ff = {}: cumulative effort {}, {} rows",
                g9(summary.k_ff),
                g9(summary.cumulative_effort),
                log.rows.len()
            );
            Outcome::Success
        }
    }
}

pub fn cmd_sweep(config: &Path, out: &Path) -> Outcome {
    let scenario = match load_scenario(config) {
        Ok(s) => s,
        Err(e) => return config_failure(e),
    };
    if scenario.k_ff_sweep.is_empty() {
        return config_failure(ConfigError::Invalid {
            key: "sweep.k_ff_sweep".into(),
            message: "needs at least one factor".into(),
        });
    }
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => return config_failure(e),
    };
    if let Err(o) = prepare(out) {
        return o;
    }
    let rows = match sweep(&scenario, &scenario.k_ff_sweep, threads) {
        Ok(rows) => rows,
        Err(e) => return config_failure(e.into()),
    };

    let mut outcome = Outcome::Success;
    for row in &rows {
        match &row.outcome {
            Ok((log, summary)) => {
                let path = out.join(sweep_csv_name(row.k_ff));
                if let Err(e) = write_csv_file(log, &path) {
                    return io_failure(&path, e);
                }
                if let Some(d) = summary.divergence {
                    eprintln!("k_ff = {}: diverged at t = {} s", g9(row.k_ff), g9(d.time));
                    outcome = Outcome::Diverged;
                }
            }
            Err(e) => {
                eprintln!("k_ff = {}: runtime error: {e}", g9(row.k_ff));
                outcome = Outcome::Diverged;
            }
        }
    }
    let report = sweep_report(&rows);
    let path = out.join("sweep_report.txt");
    if let Err(e) = fs::write(&path, &report) {
        return io_failure(&path, e);
    }
    print!("{report}");
    outcome
}

pub fn cmd_validate(faults: Faults) -> Outcome {
    let results = run_all(faults);
    for r in &results {
        println!("{}", r.line());
    }
    let failing: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!("{}/{} criteria passed", results.len() - failing.len(), results.len());
    if failing.is_empty() {
        Outcome::Success
    } else {
        println!("failing: {failing:?}");
        Outcome::CriteriaFailed
    }
}
