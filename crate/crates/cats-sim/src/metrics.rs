//! Run reports and web-vitals style metrics.
//!
//! A finished run distills into a [`RunReport`]: per-group delivery timings,
//! a QoE summary (FCP / TTI / LCP / CLS), wire and scheduler counters, and
//! the echoed configuration. [`compare`] lines up two reports for the same
//! scenario; the embedded config hash stops it from silently mixing runs
//! built from different setups.
//!
//! The QoE mapping onto priority groups: FCP is the last completion among
//! P0-P1, TTI the last among P0-P2, LCP the P3 completion, and CLS is
//! classified from how long the P3 content lands after the P1 content it
//! would displace.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cc::CcSnapshot;
use crate::conductor::{ConductorCounters, LEVELS};

/// Layout-shift classification threshold: P3 content arriving more than this
/// many milliseconds after the P1 content pushes the page into `poor`.
pub const DEFAULT_CLS_THRESHOLD_MS: f64 = 400.0;

/// Per-group outcome. Times are milliseconds from simulation start. A `None`
/// completion means the run ended before the group's surviving bytes were
/// all acknowledged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    pub priority: u8,
    /// Bytes submitted for the group, shed bytes included.
    pub bytes: u64,
    pub submitted_at_ms: f64,
    pub first_transmit_ms: Option<f64>,
    pub completed_at_ms: Option<f64>,
    /// Bytes discarded by load shedding; they do not count toward completion.
    pub shed_bytes: u64,
    /// bytes x 8 / (completion - first transmit).
    pub effective_throughput_bps: Option<f64>,
    /// bytes x 8 / (completion - submission): the rate the page experienced
    /// while waiting on the group, queueing delay included.
    pub delivery_throughput_bps: Option<f64>,
}

/// Throughput over the transmit window, `None` until the group has both a
/// first transmit and a completion.
pub fn effective_throughput_bps(
    bytes: u64,
    first_transmit_ms: f64,
    completed_at_ms: f64,
) -> Option<f64> {
    let interval_ms = completed_at_ms - first_transmit_ms;
    if bytes == 0 || interval_ms <= 0.0 {
        return None;
    }
    Some(bytes as f64 * 8000.0 / interval_ms)
}

/// Throughput over the waiting window (submission to completion).
pub fn delivery_throughput_bps(
    bytes: u64,
    submitted_at_ms: f64,
    completed_at_ms: f64,
) -> Option<f64> {
    let interval_ms = completed_at_ms - submitted_at_ms;
    if bytes == 0 || interval_ms <= 0.0 {
        return None;
    }
    Some(bytes as f64 * 8000.0 / interval_ms)
}

fn last_completion<F: Fn(u8) -> bool>(groups: &[GroupReport], keep: F) -> Option<f64> {
    let mut latest: Option<f64> = None;
    let mut any = false;
    for g in groups.iter().filter(|g| keep(g.priority)) {
        any = true;
        let done = g.completed_at_ms?;
        latest = Some(latest.map_or(done, |m: f64| m.max(done)));
    }
    if any { latest } else { None }
}

/// First contentful paint: the last completion among the P0 and P1 groups.
pub fn fcp_ms(groups: &[GroupReport]) -> Option<f64> {
    last_completion(groups, |p| p <= 1)
}

/// Time to interactive: the last completion among P0 through P2.
pub fn tti_ms(groups: &[GroupReport]) -> Option<f64> {
    last_completion(groups, |p| p <= 2)
}

/// Largest contentful paint: the last P3 completion.
pub fn lcp_ms(groups: &[GroupReport]) -> Option<f64> {
    last_completion(groups, |p| p == 3)
}

/// Layout-shift delta: how long the P3 content lands after the P1 content.
pub fn cls_delta_ms(groups: &[GroupReport]) -> Option<f64> {
    let p3 = last_completion(groups, |p| p == 3)?;
    let p1 = last_completion(groups, |p| p == 1)?;
    Some(p3 - p1)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClsClass {
    Good,
    Poor,
}

impl std::fmt::Display for ClsClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClsClass::Good => write!(f, "good"),
            ClsClass::Poor => write!(f, "poor"),
        }
    }
}

/// Classify a layout-shift delta. Content that arrives before (or with) its
/// reference never shifts anything; after that the threshold decides.
pub fn cls_class(delta_ms: f64, threshold_ms: f64) -> ClsClass {
    if delta_ms <= 0.0 {
        return ClsClass::Good;
    }
    if delta_ms > threshold_ms {
        ClsClass::Poor
    } else {
        ClsClass::Good
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoeSummary {
    pub fcp_ms: Option<f64>,
    pub tti_ms: Option<f64>,
    pub lcp_ms: Option<f64>,
    pub cls_delta_ms: Option<f64>,
    pub cls_class: Option<ClsClass>,
    pub cls_threshold_ms: f64,
}

impl QoeSummary {
    pub fn from_groups(groups: &[GroupReport], cls_threshold_ms: f64) -> QoeSummary {
        let delta = cls_delta_ms(groups);
        QoeSummary {
            fcp_ms: fcp_ms(groups),
            tti_ms: tti_ms(groups),
            lcp_ms: lcp_ms(groups),
            cls_delta_ms: delta,
            cls_class: delta.map(|d| cls_class(d, cls_threshold_ms)),
            cls_threshold_ms,
        }
    }
}

/// Page load time: the last completion over every group, `None` while any
/// group is unfinished.
pub fn total_completion_ms(groups: &[GroupReport]) -> Option<f64> {
    last_completion(groups, |_| true)
}

#[derive(Clone, Copy, Default, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireStats {
    pub segments_sent: u64,
    pub retransmits: u64,
    pub dup_acks: u64,
    pub rto_firings: u64,
    pub protocol_errors: u64,
    pub bottleneck_bytes_forwarded: u64,
    pub bottleneck_drops: u64,
    pub bottleneck_peak_queue: usize,
    /// Data segments seen by the receiver, by wire-tagged priority level.
    pub tagged_segments: [u64; LEVELS],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: String,
    /// Hash of the scheme-independent configuration; `compare` refuses
    /// reports whose hashes differ.
    pub config_hash: String,
    pub config: serde_json::Value,
    /// Round trip of a zero-size probe pair before the run: pure propagation.
    pub base_rtt_probe_ms: f64,
    pub handshake_ms: f64,
    pub total_completion_ms: Option<f64>,
    /// Bottleneck departure rate over the middle of the run.
    pub steady_rate_bps: Option<f64>,
    pub qoe: QoeSummary,
    pub groups: Vec<GroupReport>,
    pub wire: WireStats,
    pub conductor: Option<ConductorCounters>,
    pub cc: CcSnapshot,
    pub events_dispatched: u64,
}

#[derive(Error, Debug)]
pub enum ReportIoError {
    #[error("report file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("report file {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl RunReport {
    /// Deterministic pretty JSON; identical runs serialize byte-identically.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportIoError> {
        fs::write(path, self.to_json_string()).map_err(|source| ReportIoError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<RunReport, ReportIoError> {
        let text = fs::read_to_string(path).map_err(|source| ReportIoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ReportIoError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

/// CSV summary, one row per group.
pub fn group_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "label,priority,bytes,submitted_ms,first_transmit_ms,completed_ms,\
         effective_bps,delivery_bps,shed_bytes\n",
    );
    for g in &report.groups {
        let _ = write!(out, "{},{},{},{:.3},", g.label, g.priority, g.bytes, g.submitted_at_ms);
        push_opt_ms(&mut out, g.first_transmit_ms);
        out.push(',');
        push_opt_ms(&mut out, g.completed_at_ms);
        out.push(',');
        push_opt_bps(&mut out, g.effective_throughput_bps);
        out.push(',');
        push_opt_bps(&mut out, g.delivery_throughput_bps);
        let _ = writeln!(out, ",{}", g.shed_bytes);
    }
    out
}

fn push_opt_ms(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v:.3}");
    }
}

fn push_opt_bps(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v:.0}");
    }
}

fn dat_pairs<'a>(
    baseline: &'a RunReport,
    candidate: &'a RunReport,
) -> impl Iterator<Item = (usize, &'a GroupReport, &'a GroupReport)> {
    debug_assert_eq!(baseline.groups.len(), candidate.groups.len());
    baseline
        .groups
        .iter()
        .zip(&candidate.groups)
        .enumerate()
        .map(|(i, (b, c))| (i, b, c))
}

/// Gnuplot-ready completion-time bars: index, label, baseline ms, candidate ms.
pub fn completion_dat(baseline: &RunReport, candidate: &RunReport) -> String {
    let mut out = format!(
        "# group completions (ms): {} vs {}\n# idx label {} {}\n",
        baseline.scheme, candidate.scheme, baseline.scheme, candidate.scheme
    );
    for (i, b, c) in dat_pairs(baseline, candidate) {
        let _ = write!(out, "{i} {} ", b.label);
        push_opt_ms(&mut out, b.completed_at_ms);
        out.push(' ');
        push_opt_ms(&mut out, c.completed_at_ms);
        out.push('\n');
    }
    out
}

/// Gnuplot-ready per-group delivery-throughput bars.
pub fn throughput_dat(baseline: &RunReport, candidate: &RunReport) -> String {
    let mut out = format!(
        "# group delivery throughput (bps): {} vs {}\n# idx label {} {}\n",
        baseline.scheme, candidate.scheme, baseline.scheme, candidate.scheme
    );
    for (i, b, c) in dat_pairs(baseline, candidate) {
        let _ = write!(out, "{i} {} ", b.label);
        push_opt_bps(&mut out, b.delivery_throughput_bps);
        out.push(' ');
        push_opt_bps(&mut out, c.delivery_throughput_bps);
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub metric: String,
    pub baseline_ms: f64,
    pub candidate_ms: f64,
    /// (baseline - candidate) / baseline, in percent; positive means the
    /// candidate finished sooner.
    pub improvement_pct: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupRow {
    pub label: String,
    pub priority: u8,
    pub baseline_ms: Option<f64>,
    pub candidate_ms: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub config_hash: String,
    pub baseline_scheme: String,
    pub candidate_scheme: String,
    pub groups: Vec<GroupRow>,
    pub metrics: Vec<MetricRow>,
    pub cls_baseline: Option<ClsClass>,
    pub cls_candidate: Option<ClsClass>,
    pub total_baseline_ms: Option<f64>,
    pub total_candidate_ms: Option<f64>,
    /// |candidate - baseline| / baseline on total load, in percent.
    pub total_parity_pct: Option<f64>,
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum CompareError {
    #[error("config hash mismatch: baseline {baseline} vs candidate {candidate}")]
    ConfigMismatch { baseline: String, candidate: String },
}

/// Round to one decimal, the precision comparison tables are quoted at.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn improvement_pct(baseline: f64, candidate: f64) -> f64 {
    if baseline == 0.0 {
        return 0.0;
    }
    (baseline - candidate) / baseline * 100.0
}

/// Line up two reports of the same scenario. The first argument is the
/// reference the improvement percentages are measured against.
pub fn compare(baseline: &RunReport, candidate: &RunReport) -> Result<Comparison, CompareError> {
    if baseline.config_hash != candidate.config_hash {
        return Err(CompareError::ConfigMismatch {
            baseline: baseline.config_hash.clone(),
            candidate: candidate.config_hash.clone(),
        });
    }
    let groups = baseline
        .groups
        .iter()
        .zip(&candidate.groups)
        .map(|(b, c)| GroupRow {
            label: b.label.clone(),
            priority: b.priority,
            baseline_ms: b.completed_at_ms,
            candidate_ms: c.completed_at_ms,
        })
        .collect();
    let mut metrics = Vec::new();
    let pairs: [(&str, Option<f64>, Option<f64>); 3] = [
        ("fcp", baseline.qoe.fcp_ms, candidate.qoe.fcp_ms),
        ("tti", baseline.qoe.tti_ms, candidate.qoe.tti_ms),
        ("lcp", baseline.qoe.lcp_ms, candidate.qoe.lcp_ms),
    ];
    for (name, b, c) in pairs {
        if let (Some(b), Some(c)) = (b, c) {
            metrics.push(MetricRow {
                metric: name.to_string(),
                baseline_ms: b,
                candidate_ms: c,
                improvement_pct: improvement_pct(b, c),
            });
        }
    }
    let total_baseline_ms = baseline.total_completion_ms;
    let total_candidate_ms = candidate.total_completion_ms;
    let total_parity_pct = match (total_baseline_ms, total_candidate_ms) {
        (Some(b), Some(c)) if b != 0.0 => Some((c - b).abs() / b * 100.0),
        _ => None,
    };
    Ok(Comparison {
        config_hash: baseline.config_hash.clone(),
        baseline_scheme: baseline.scheme.clone(),
        candidate_scheme: candidate.scheme.clone(),
        groups,
        metrics,
        cls_baseline: baseline.qoe.cls_class,
        cls_candidate: candidate.qoe.cls_class,
        total_baseline_ms,
        total_candidate_ms,
        total_parity_pct,
    })
}

/// Human-readable comparison table.
pub fn render_comparison(c: &Comparison) -> String {
    let mut out = format!(
        "comparison ({} vs {}), config {}\n\n",
        c.baseline_scheme, c.candidate_scheme, c.config_hash
    );
    let _ = writeln!(
        out,
        "{:<12} {:>4} {:>14} {:>14}",
        "group", "prio", c.baseline_scheme, c.candidate_scheme
    );
    for g in &c.groups {
        let _ = writeln!(
            out,
            "{:<12} {:>4} {:>14} {:>14}",
            g.label,
            format!("P{}", g.priority),
            fmt_opt_ms(g.baseline_ms),
            fmt_opt_ms(g.candidate_ms),
        );
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<12} {:>14} {:>14} {:>10}",
        "metric", c.baseline_scheme, c.candidate_scheme, "improv"
    );
    for m in &c.metrics {
        let _ = writeln!(
            out,
            "{:<12} {:>14} {:>14} {:>9.1}%",
            m.metric,
            fmt_opt_ms(Some(m.baseline_ms)),
            fmt_opt_ms(Some(m.candidate_ms)),
            round1(m.improvement_pct),
        );
    }
    let _ = writeln!(
        out,
        "{:<12} {:>14} {:>14}",
        "cls",
        c.cls_baseline.map_or_else(|| "-".to_string(), |v| v.to_string()),
        c.cls_candidate.map_or_else(|| "-".to_string(), |v| v.to_string()),
    );
    let _ = writeln!(
        out,
        "{:<12} {:>14} {:>14} {:>10}",
        "total",
        fmt_opt_ms(c.total_baseline_ms),
        fmt_opt_ms(c.total_candidate_ms),
        c.total_parity_pct
            .map_or_else(|| "-".to_string(), |p| format!("d={:.1}%", round1(p))),
    );
    out
}

fn fmt_opt_ms(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.1} ms"))
}
