//! Full metric table for the reference page: per-group completions, the
//! page-level milestones (first paint, interactive, largest element), and
//! the layout-shift verdict, baseline vs cats.
//!
//! Run with `cargo run --example qoe_compare`.

use cats_sim::experiment::{run, ExperimentConfig, Scheme};
use cats_sim::metrics::{compare, render_comparison};

fn main() {
    let base = run(&ExperimentConfig::reference_preset(Scheme::Baseline)).unwrap();
    let cats = run(&ExperimentConfig::reference_preset(Scheme::Cats)).unwrap();

    let cmp = compare(&base.report, &cats.report).unwrap();
    print!("{}", render_comparison(&cmp));

    println!();
    for report in [&base.report, &cats.report] {
        let q = &report.qoe;
        println!(
            "{:<9} shift window {:>8.1} ms ({:?}, threshold {} ms)",
            report.scheme,
            q.cls_delta_ms.unwrap(),
            q.cls_class.unwrap(),
            q.cls_threshold_ms,
        );
    }
    println!();
    println!(
        "the shift verdict is the deliberate cost: cats holds the image \
         bytes back for {:.0} ms after the styles land,",
        cats.report.qoe.cls_delta_ms.unwrap()
    );
    println!("so everything above it on the page paints sooner.");
}
