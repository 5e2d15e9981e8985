//! Watch the congestion controller find the path: exponential startup,
//! a drain of the queue it built, then steady bandwidth probing. The run
//! records one controller snapshot per delivery sample to a CSV trace;
//! this example replays that trace as a phase timeline.
//!
//! Run with `cargo run --example cc_startup`.

use std::fs;

use cats_sim::conductor::Priority;
use cats_sim::experiment::{run_to_files, ExperimentConfig, Scheme, TraceConfig};
use cats_sim::workload::{GroupSpec, WorkloadFile, WorkloadSpec};

fn main() {
    let spec = WorkloadSpec {
        groups: vec![GroupSpec {
            label: "download".into(),
            priority: Priority::P0,
            size: 1_500_000,
            repeat: None,
        }],
        submission_order: vec![0],
        submitted_at: cats_sim::sim::SimTime::ZERO,
    };
    let mut cfg = ExperimentConfig::reference_preset(Scheme::Cats);
    cfg.workload = Some(WorkloadFile::from_spec(&spec));

    let dir = std::env::temp_dir().join(format!("cats-sim-cc-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let trace = TraceConfig { cc: true, ..TraceConfig::default() };
    let out = run_to_files(&cfg, &dir, trace, "cc").unwrap();

    let csv = fs::read_to_string(dir.join("cc.cc.trace")).unwrap();
    println!("single 1.5 MB transfer over 2 Mbps / 50 ms\n");
    println!(
        "{:>10} {:<8} {:>12} {:>12} {:>8}",
        "ms", "phase", "btl_bw bps", "pacing bps", "cwnd"
    );
    let mut last_phase = String::new();
    let mut rows = 0u32;
    for line in csv.lines().skip(1) {
        rows += 1;
        let f: Vec<&str> = line.split(',').collect();
        let (ns, phase) = (f[0].parse::<u64>().unwrap(), f[1]);
        // Print each phase's first sample; they tell the whole story.
        if phase != last_phase {
            println!(
                "{:>10.1} {:<8} {:>12} {:>12} {:>8}",
                ns as f64 / 1e6,
                phase,
                f[2],
                f[4],
                f[5]
            );
            last_phase = phase.to_string();
        }
    }

    let cc = &out.report.cc;
    println!("\n{rows} samples total; final snapshot after {:.1} ms:", out.report.total_completion_ms.unwrap());
    println!("  phase {:?}, pacing gain {:.3}", cc.phase, cc.pacing_gain);
    println!("  btl_bw {} bps, rt_prop {:.3} ms, cwnd {} bytes", cc.btl_bw_bps, cc.rt_prop_ms, cc.cwnd_bytes);
    println!("\nstartup paces at 2.885x the estimate until the bandwidth filter");
    println!("plateaus, drain empties the queue startup built, and the probe");
    println!("cycle then dwells an rtt above, an rtt below, six at the estimate.");

    let _ = fs::remove_dir_all(&dir);
}
