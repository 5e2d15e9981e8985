//! Thin command-line front end over [`cats_sim::experiment`].

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cats_sim::experiment::{
    self, CompareFilesError, ExperimentConfig, Scheme, TraceConfig,
};
use cats_sim::metrics::{self, RunReport};

#[derive(Parser)]
#[command(name = "cats-sim", version, about = "Priority-aware transport scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its report, CSV, and traces.
    Run(RunArgs),
    /// Compare two report files (baseline vs candidate).
    Compare(CompareArgs),
    /// Run several configs in parallel, one engine per worker.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML); flags below override its values.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named parameter set; `reference` is the built-in scenario.
    #[arg(long)]
    preset: Option<String>,
    /// cats or baseline.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Run seed, echoed into the report and its config hash.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated trace streams: events,schedule,cc.
    #[arg(long)]
    trace: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// First report file.
    a: PathBuf,
    /// Second report file.
    b: PathBuf,
    /// Directory for comparison.json and the .dat tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario files; each run is named after the file stem.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Compare(args) => cmd_compare(args),
        Cmd::Sweep(args) => cmd_sweep(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let mut cfg = match (&args.config, args.preset.as_deref()) {
        (Some(path), None) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        (None, Some("reference") | None) => ExperimentConfig::reference_preset(Scheme::Cats),
        (None, Some(other)) => return Err(format!("unknown preset {other:?} (try: reference)")),
        (Some(_), Some(_)) => unreachable!("clap rejects --config with --preset"),
    };
    if let Some(scheme) = args.scheme {
        cfg.scheme = scheme;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let trace = match args.trace.as_deref() {
        Some(flag) => TraceConfig::parse_flag(flag)?,
        None => TraceConfig::default(),
    };
    let prefix = cfg.scheme.as_str().to_string();
    let out = experiment::run_to_files(&cfg, &args.out, trace, &prefix)
        .map_err(|e| e.to_string())?;
    print_run_summary(&out.report);
    println!("report: {}", experiment::report_path(&args.out, &prefix).display());
    Ok(ExitCode::SUCCESS)
}

fn print_run_summary(report: &RunReport) {
    println!(
        "scheme {}  config {}  events {}",
        report.scheme,
        &report.config_hash[..12.min(report.config_hash.len())],
        report.events_dispatched
    );
    println!("{:<12} {:>4} {:>10} {:>12}", "group", "prio", "bytes", "completed_ms");
    for g in &report.groups {
        let done = g
            .completed_at_ms
            .map_or_else(|| "unfinished".into(), |ms| format!("{ms:.3}"));
        println!("{:<12} {:>4} {:>10} {:>12}", g.label, g.priority, g.bytes, done);
    }
    match report.total_completion_ms {
        Some(total) => println!("total {total:.3} ms"),
        None => println!("total: run stopped before completion"),
    }
    if let Some(rate) = report.steady_rate_bps {
        println!("steady rate {:.3} Mbps", rate / 1e6);
    }
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode, String> {
    match experiment::compare_to_files(&args.a, &args.b, &args.out) {
        Ok(cmp) => {
            print!("{}", metrics::render_comparison(&cmp));
            Ok(ExitCode::SUCCESS)
        }
        Err(CompareFilesError::Mismatch(e)) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(2))
        }
        Err(other) => Err(other.to_string()),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, String> {
    let mut configs = Vec::with_capacity(args.configs.len());
    for path in &args.configs {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| format!("{}: cannot derive a run name", path.display()))?
            .to_string();
        if configs.iter().any(|(n, _)| n == &name) {
            return Err(format!("duplicate run name {name:?}; rename one config file"));
        }
        let cfg = ExperimentConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
        configs.push((name, cfg));
    }
    let results = experiment::sweep(&configs, &args.out).map_err(|e| e.to_string())?;
    for (name, report) in &results {
        let total = report
            .total_completion_ms
            .map_or_else(|| "unfinished".into(), |ms| format!("{ms:.3} ms"));
        println!("{name}: scheme {} total {total}", report.scheme);
    }
    println!("{} runs written to {}", results.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
