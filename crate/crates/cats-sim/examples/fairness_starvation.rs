//! Why the top priority has a debt watermark at all: a sustained P0 stream
//! that outruns the pacer never leaves the conductor idle, so without a cap
//! a P4 transfer behind it never sends a byte. With a cap, P0 periodically
//! enters debt and the bulk transfer drains through the gaps.
//!
//! Run with `cargo run --example fairness_starvation`.

use cats_sim::conductor::Priority;
use cats_sim::experiment::{run, ExperimentConfig, Scheme};
use cats_sim::experiment::config::Watermark;
use cats_sim::sim::SimTime;
use cats_sim::workload::{GroupSpec, RepeatSpec, WorkloadFile, WorkloadSpec};

/// 2500 bytes every 5 ms = 4 Mbps offered at P0, twice the bottleneck;
/// plus one 50 KB transfer at P4.
fn scenario(p0_high: Option<u64>) -> ExperimentConfig {
    let spec = WorkloadSpec {
        groups: vec![
            GroupSpec {
                label: "stream".into(),
                priority: Priority::P0,
                size: 2_500,
                repeat: Some(RepeatSpec { interval: SimTime::from_millis(5), count: 1199 }),
            },
            GroupSpec { label: "bulk".into(), priority: Priority::P4, size: 50_000, repeat: None },
        ],
        submission_order: vec![1, 0],
        submitted_at: SimTime::ZERO,
    };
    let mut cfg = ExperimentConfig::reference_preset(Scheme::Cats);
    cfg.workload = Some(WorkloadFile::from_spec(&spec));
    cfg.fairness.high[0] = Watermark(p0_high);
    cfg.fairness.low[0] = p0_high.map_or(0, |h| h / 2);
    cfg.stop_at_ms = Some(8_000.0);
    cfg
}

fn main() {
    for (label, high) in [("unbounded P0", None), ("P0 capped at 64 KiB", Some(64 * 1024))] {
        let out = run(&scenario(high)).unwrap();
        let bulk = out.report.groups.iter().find(|g| g.label == "bulk").unwrap();
        let counters = out.report.conductor.as_ref().unwrap();
        println!("{label}:");
        println!("  bulk bytes sent      {:>7} of {}", counters.committed[4], bulk.bytes);
        match bulk.completed_at_ms {
            Some(ms) => println!("  bulk completed at    {ms:>10.1} ms"),
            None => println!("  bulk completed at        never (8 s simulated)"),
        }
        println!("  deadlock resolutions {:>7}", counters.deadlock_resolutions);
        println!();
    }
    println!("each resolution rescales the debts so at least one backlogged");
    println!("queue may send; the cycles drain the 50 KB alongside the stream.");
}
