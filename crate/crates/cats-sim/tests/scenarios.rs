//! End-to-end scenario checks beyond the acceptance gate: stream layout,
//! mid-transfer preemption, congestion shedding, and config plumbing.

use cats_sim::conductor::Priority;
use cats_sim::experiment::{
    run, verify_delivered_stream, ExperimentConfig, RunOutput, Scheme,
};
use cats_sim::sim::SimTime;
use cats_sim::workload::{GroupSpec, RepeatSpec, WorkloadFile, WorkloadSpec};

fn completed(out: &RunOutput, label: &str) -> f64 {
    out.report
        .groups
        .iter()
        .find(|g| g.label == label)
        .and_then(|g| g.completed_at_ms)
        .unwrap_or_else(|| panic!("group {label} never completed"))
}

/// Reference-page runs lay the delivered stream out in opposite orders:
/// cats in priority order, baseline in submission order.
#[test]
fn reference_stream_layout_is_priority_vs_submission_order() {
    let cats = run(&ExperimentConfig::reference_preset(Scheme::Cats)).unwrap();
    let ends: Vec<(u64, usize)> = cats.intervals.iter().map(|iv| (iv.end, iv.group)).collect();
    assert_eq!(
        ends,
        vec![(8192, 0), (33792, 1), (74752, 2), (136192, 3), (289792, 4)],
        "cats delivers whole groups in priority order"
    );

    let base = run(&ExperimentConfig::reference_preset(Scheme::Baseline)).unwrap();
    let ends: Vec<(u64, usize)> = base.intervals.iter().map(|iv| (iv.end, iv.group)).collect();
    assert_eq!(
        ends,
        vec![(153600, 4), (215040, 3), (256000, 2), (281600, 1), (289792, 0)],
        "baseline delivers in submission order"
    );
}

/// An urgent burst arriving mid-transfer overtakes queued bulk data under
/// cats and waits behind it under the baseline. The urgent group submits
/// twice (t=0 and t=400ms); the second burst lands while the bulk transfer
/// is about half done.
#[test]
fn late_urgent_burst_preempts_only_under_cats() {
    let spec = WorkloadSpec {
        groups: vec![
            GroupSpec {
                label: "bulk".into(),
                priority: Priority::P3,
                size: 200_000,
                repeat: None,
            },
            GroupSpec {
                label: "urgent".into(),
                priority: Priority::P0,
                size: 5_000,
                repeat: Some(RepeatSpec { interval: SimTime::from_millis(400), count: 1 }),
            },
        ],
        submission_order: vec![0, 1],
        submitted_at: SimTime::ZERO,
    };
    let mut cfg = ExperimentConfig::reference_preset(Scheme::Cats);
    cfg.workload = Some(WorkloadFile::from_spec(&spec));

    let cats = run(&cfg).unwrap();
    verify_delivered_stream(&cats).unwrap();
    assert!(
        completed(&cats, "urgent") < completed(&cats, "bulk"),
        "cats: urgent {} ms before bulk {} ms",
        completed(&cats, "urgent"),
        completed(&cats, "bulk")
    );
    // The second burst itself arrived at 400 ms and still beat the bulk end.
    assert!(completed(&cats, "urgent") > 400.0);

    cfg.scheme = Scheme::Baseline;
    let base = run(&cfg).unwrap();
    verify_delivered_stream(&base).unwrap();
    assert!(
        completed(&base, "urgent") > completed(&base, "bulk"),
        "baseline: urgent {} ms after bulk {} ms",
        completed(&base, "urgent"),
        completed(&base, "bulk")
    );
}

/// With the congestion monitor on, a standing queue during slow-start sheds
/// the oldest lowest-priority chunk and the page completes without it.
#[test]
fn congestion_monitor_sheds_lowest_priority_first() {
    let mut cfg = ExperimentConfig::reference_preset(Scheme::Cats);
    cfg.shed_monitor.enabled = true;
    cfg.shed_monitor.srtt_factor = 2.0;
    cfg.shed_monitor.trigger_rtts = 2;
    let out = run(&cfg).unwrap();
    verify_delivered_stream(&out).unwrap();

    let conductor = out.report.conductor.as_ref().unwrap();
    assert!(conductor.shed[4] > 0, "lowest priority sheds first: {:?}", conductor.shed);
    assert_eq!(conductor.shed[0], 0, "top priority never sheds");

    let by_label =
        |label: &str| out.report.groups.iter().find(|g| g.label == label).unwrap();
    for label in ["html", "css", "js", "images"] {
        assert!(by_label(label).completed_at_ms.is_some(), "{label} still completes");
        assert_eq!(by_label(label).shed_bytes, 0);
    }
    let analytics = by_label("analytics");
    assert_eq!(analytics.shed_bytes, 153_600, "whole chunk shed");
    assert!(analytics.completed_at_ms.is_none(), "fully shed group never completes");
    assert_eq!(
        out.receiver_stream.len() as u64,
        289_792 - 153_600,
        "delivered stream shrinks by the shed bytes"
    );
}

/// A full scenario defined in TOML, workload included, runs end to end.
#[test]
fn toml_scenario_round_trip() {
    let text = r#"
        scheme = "baseline"
        seed = 9
        bottleneck_bps = 4_000_000

        [workload]
        submission_order = ["trailer", "feature"]

        [[workload.group]]
        label = "feature"
        priority = 1
        size = 30000

        [[workload.group]]
        label = "trailer"
        priority = 3
        size = 15000
    "#;
    let cfg = ExperimentConfig::from_toml_str(text).unwrap();
    let out = run(&cfg).unwrap();
    verify_delivered_stream(&out).unwrap();
    assert_eq!(out.report.scheme, "baseline");
    let labels: Vec<&str> = out.report.groups.iter().map(|g| g.label.as_str()).collect();
    assert_eq!(labels, ["feature", "trailer"], "report keeps workload file order");
    // FIFO: the trailer was submitted first and finishes first.
    assert!(completed(&out, "trailer") < completed(&out, "feature"));
    assert_eq!(out.receiver_stream.len(), 45_000);
}

/// The controller's path model settles on the configured bottleneck.
#[test]
fn controller_converges_to_path_parameters() {
    let out = run(&ExperimentConfig::reference_preset(Scheme::Cats)).unwrap();
    let cc = &out.report.cc;
    let bw_err = (cc.btl_bw_bps as f64 - 2e6).abs() / 2e6;
    assert!(bw_err < 0.05, "btl_bw {} within 5% of 2 Mbps", cc.btl_bw_bps);
    assert!(
        (cc.rt_prop_ms - 50.33).abs() < 0.1,
        "rt_prop {} tracks base rtt plus serialization",
        cc.rt_prop_ms
    );
    assert!(
        (out.report.handshake_ms - cc.rt_prop_ms).abs() < 1e-6,
        "handshake rtt {} is the floor sample {}",
        out.report.handshake_ms,
        cc.rt_prop_ms
    );
}
