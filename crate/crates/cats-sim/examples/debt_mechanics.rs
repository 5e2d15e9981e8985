//! The debt ledger in isolation: hysteresis between the two watermarks,
//! payback from lower-priority sends, and a deadlock resolution when every
//! backlogged queue is in debt at once.
//!
//! Tiny watermarks keep the trace short. P1 pays back at 1x, P2 at 2x, so
//! each P2 send retires twice its size from P1's debt.
//!
//! Run with `cargo run --example debt_mechanics`.

use bytes::Bytes;
use cats_sim::conductor::{
    Conductor, FairnessConfig, Priority, QueueState,
};
use cats_sim::sim::SimTime;
use num_rational::Ratio;

const MSS: usize = 1_000;

fn states(c: &Conductor) -> String {
    c.ledger()
        .states()
        .iter()
        .map(|s| if *s == QueueState::Eligible { 'E' } else { 'D' })
        .collect()
}

fn main() {
    let mut cfg = FairnessConfig::default();
    for (i, q) in cfg.queues.iter_mut().enumerate() {
        q.high = if i == 0 { None } else { Some(3_000) };
        q.low = if i == 0 { 0 } else { 1_500 };
        q.payback = Ratio::from_integer(i.max(1) as u64);
    }
    let mut c = Conductor::new(cfg).unwrap();
    c.intercept(Bytes::from(vec![1u8; 10_000]), Priority::P1, SimTime::ZERO).unwrap();
    c.intercept(Bytes::from(vec![2u8; 10_000]), Priority::P2, SimTime::ZERO).unwrap();

    println!("two backlogged queues, high=3000 low=1500, payback P1=1x P2=2x\n");
    println!("{:>4} {:>6} {:>6} {:>8} {:>8}  states", "step", "sent", "bytes", "debt P1", "debt P2");
    let mut resolutions = 0;
    for step in 1.. {
        let Some(sel) = c.select_next(MSS) else { break };
        let n = sel.payload.len();
        let queue = sel.queue;
        c.commit_send(queue, n);
        let d = c.ledger().debts();
        let note = if c.counters().deadlock_resolutions > resolutions {
            resolutions = c.counters().deadlock_resolutions;
            "  <- deadlock: debts rescaled, then this send"
        } else {
            ""
        };
        println!(
            "{:>4} {:>6} {:>6} {:>8} {:>8}  {}{}",
            step,
            format!("P{}", queue.level()),
            n,
            d[1],
            d[2],
            states(&c),
            note
        );
        if step >= 24 {
            break;
        }
    }

    let counters = c.counters();
    println!("\ncommitted per level: {:?}", counters.committed);
    println!("deadlock resolutions: {}", counters.deadlock_resolutions);
    println!("\nthree regimes above: P1 sends until its debt hits the high");
    println!("watermark and P2's sends pay it back below the low one; when both");
    println!("stall in debt the ledger rescales (step 13); and once P1 drains,");
    println!("P2 is alone, so each resolution forces it eligible with its debt");
    println!("kept. A lone backlogged queue can always send.");
}
