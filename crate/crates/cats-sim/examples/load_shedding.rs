//! Dropping work instead of queueing it. Two forms:
//!
//! 1. The congestion monitor inside a run: when smoothed RTT stays above a
//!    multiple of the path floor, the sender sheds whole low-priority chunks
//!    sized to the standing queue.
//! 2. Direct calls on a conductor: Save-Data style "drop everything below
//!    P2" and a byte-budgeted congestion shed.
//!
//! Run with `cargo run --example load_shedding`.

use bytes::Bytes;
use cats_sim::conductor::{Conductor, FairnessConfig, Priority};
use cats_sim::experiment::{run, verify_delivered_stream, ExperimentConfig, Scheme};
use cats_sim::sim::SimTime;

fn monitor_demo() {
    let mut cfg = ExperimentConfig::reference_preset(Scheme::Cats);
    cfg.shed_monitor.enabled = true;
    cfg.shed_monitor.srtt_factor = 2.0;
    cfg.shed_monitor.trigger_rtts = 2;
    let out = run(&cfg).unwrap();
    verify_delivered_stream(&out).unwrap();

    println!("reference page with the monitor armed (srtt > 2.0x floor for 2 rtts):\n");
    let shed = out.report.conductor.as_ref().unwrap().shed;
    for g in &out.report.groups {
        println!(
            "  {:<12} {:>8} bytes   shed {:>7}   {}",
            g.label,
            g.bytes,
            g.shed_bytes,
            match g.completed_at_ms {
                Some(ms) => format!("completed {ms:.1} ms"),
                None => "dropped entirely".into(),
            }
        );
    }
    println!("\n  shed per level {shed:?}");
    println!("  the slow-start overshoot builds a standing queue; the monitor");
    println!("  fires once and the oldest lowest-priority chunk absorbs it.\n");
}

fn direct_demo() {
    let mut c = Conductor::new(FairnessConfig::default()).unwrap();
    for (level, n) in [(1u8, 4_000), (2, 6_000), (3, 8_000), (4, 12_000)] {
        let p = Priority::new(level).unwrap();
        c.intercept(Bytes::from(vec![level; n]), p, SimTime::ZERO).unwrap();
    }

    let list = |chunks: &[cats_sim::conductor::ShedChunk]| {
        chunks
            .iter()
            .map(|s| format!("P{} x {} bytes", s.priority.level(), s.bytes))
            .collect::<Vec<_>>()
            .join(", ")
    };

    println!("direct shedding on a conductor holding P1..P4 chunks:\n");
    let dropped = c.shed_on_congestion(10_000);
    println!("  shed_on_congestion(10_000) -> {}", list(&dropped));
    println!("  (whole chunks, lowest priority first, until the budget is met)\n");

    let dropped = c.shed_below(Priority::P2);
    println!("  shed_below(P2)             -> {}", list(&dropped));
    println!("  remaining queued bytes: {}", c.total_queued());
}

fn main() {
    monitor_demo();
    direct_demo();
}
