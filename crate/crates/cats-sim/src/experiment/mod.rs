//! Experiment orchestration: configuration files, the run engine, trace
//! output, and the file layout shared by the command-line front end.
//!
//! A run directory is flat: `{prefix}.report.json` holds the full
//! [`RunReport`](crate::metrics::RunReport), `{prefix}.groups.csv` the
//! per-group table, and optional `{prefix}.{events,schedule,cc}.trace`
//! files the requested traces. Comparisons add `comparison.json`,
//! `completion.dat`, and `throughput.dat`.

pub mod config;
pub mod runner;
pub mod trace;

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use thiserror::Error;

use crate::metrics::{self, Comparison, RunReport};

pub use config::{ExperimentConfig, Scheme};
pub use runner::{run, run_traced, verify_delivered_stream, RunError, RunOutput, StreamInterval};
pub use trace::{TraceConfig, TraceSinks};

/// Run `cfg` and write `{prefix}.report.json`, `{prefix}.groups.csv`, and
/// any requested traces under `out_dir`.
pub fn run_to_files(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    trace: TraceConfig,
    prefix: &str,
) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let sinks = TraceSinks::open(out_dir, trace, prefix)?;
    let out = run_traced(cfg, sinks)?;
    out.report.save(&report_path(out_dir, prefix))?;
    fs::write(out_dir.join(format!("{prefix}.groups.csv")), metrics::group_csv(&out.report))?;
    Ok(out)
}

pub fn report_path(out_dir: &Path, prefix: &str) -> PathBuf {
    out_dir.join(format!("{prefix}.report.json"))
}

/// Load two report files and order them baseline-first when exactly one of
/// the pair is a baseline run; otherwise the argument order stands.
pub fn load_pair(
    a: &Path,
    b: &Path,
) -> Result<(RunReport, RunReport), metrics::ReportIoError> {
    let ra = RunReport::load(a)?;
    let rb = RunReport::load(b)?;
    let baseline = Scheme::Baseline.as_str();
    if rb.scheme == baseline && ra.scheme != baseline {
        Ok((rb, ra))
    } else {
        Ok((ra, rb))
    }
}

#[derive(Error, Debug)]
pub enum CompareFilesError {
    #[error(transparent)]
    Io(#[from] metrics::ReportIoError),
    #[error(transparent)]
    Mismatch(#[from] metrics::CompareError),
    #[error("io: {0}")]
    Write(#[from] std::io::Error),
}

/// Compare two report files and write `comparison.json` plus the two
/// plot-ready `.dat` tables under `out_dir`.
pub fn compare_to_files(
    a: &Path,
    b: &Path,
    out_dir: &Path,
) -> Result<Comparison, CompareFilesError> {
    let (base, cand) = load_pair(a, b)?;
    let cmp = metrics::compare(&base, &cand)?;
    fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
    json.push('\n');
    fs::write(out_dir.join("comparison.json"), json)?;
    fs::write(out_dir.join("completion.dat"), metrics::completion_dat(&base, &cand))?;
    fs::write(out_dir.join("throughput.dat"), metrics::throughput_dat(&base, &cand))?;
    Ok(cmp)
}

#[derive(Error, Debug)]
#[error("sweep config {name}: {source}")]
pub struct SweepError {
    pub name: String,
    #[source]
    pub source: RunError,
}

/// Run every named config, each on its own worker thread with nothing
/// shared, writing per-config outputs under `out_dir`. Results come back in
/// input order.
pub fn sweep(
    configs: &[(String, ExperimentConfig)],
    out_dir: &Path,
) -> Result<Vec<(String, RunReport)>, SweepError> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(configs.len().max(1));
    let mut slots: Vec<Option<Result<(String, RunReport), SweepError>>> =
        (0..configs.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            handles.push(scope.spawn(move || {
                let mut done = Vec::new();
                for (i, (name, cfg)) in configs.iter().enumerate() {
                    if i % workers != w {
                        continue;
                    }
                    let res = run_to_files(cfg, out_dir, TraceConfig::default(), name)
                        .map(|out| (name.clone(), out.report))
                        .map_err(|source| SweepError { name: name.clone(), source });
                    done.push((i, res));
                }
                done
            }));
        }
        for handle in handles {
            for (i, res) in handle.join().expect("sweep worker panicked") {
                slots[i] = Some(res);
            }
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("every index assigned to a worker"))
        .collect()
}
