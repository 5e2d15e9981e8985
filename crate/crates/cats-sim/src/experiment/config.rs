//! Scenario configuration: every knob a run depends on, its TOML file form,
//! and the config hash that pairs a cats run with its baseline.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conductor::{FairnessConfig, FairnessConfigError, QueueFairness, LEVELS};
use crate::net::{DumbbellConfig, TopologyError};
use crate::sim::SimTime;
use crate::transport::TransportConfig;
use crate::workload::{WorkloadError, WorkloadFile, WorkloadSpec};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Cats,
    Baseline,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Cats => "cats",
            Scheme::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Scheme, String> {
        match s {
            "cats" => Ok(Scheme::Cats),
            "baseline" => Ok(Scheme::Baseline),
            other => Err(format!("unknown scheme {other:?}, expected cats or baseline")),
        }
    }
}

/// A high watermark: a byte count, or `"unbounded"` for a queue that never
/// goes into debt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Watermark(pub Option<u64>);

impl Serialize for Watermark {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(b) => s.serialize_u64(b),
            None => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Watermark {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Watermark, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Bytes(u64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Bytes(b) => Ok(Watermark(Some(b))),
            Repr::Word(w) if w == "unbounded" => Ok(Watermark(None)),
            Repr::Word(w) => Err(D::Error::custom(format!(
                "watermark must be a byte count or \"unbounded\", got {w:?}"
            ))),
        }
    }
}

/// A payback multiplier: an integer or an `"a/b"` ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Payback(pub Ratio<u64>);

impl Serialize for Payback {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if *self.0.denom() == 1 {
            s.serialize_u64(*self.0.numer())
        } else {
            s.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
        }
    }
}

impl<'de> Deserialize<'de> for Payback {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Payback, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(n) => Ok(Payback(Ratio::from_integer(n))),
            Repr::Text(t) => {
                let (a, b) = t
                    .split_once('/')
                    .ok_or_else(|| D::Error::custom(format!("payback ratio {t:?} is not a/b")))?;
                let a: u64 = a.trim().parse().map_err(D::Error::custom)?;
                let b: u64 = b.trim().parse().map_err(D::Error::custom)?;
                if b == 0 {
                    return Err(D::Error::custom("payback denominator must be positive"));
                }
                Ok(Payback(Ratio::new(a, b)))
            }
        }
    }
}

/// Debt-ledger parameters in file form, one entry per priority level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessSection {
    pub high: Vec<Watermark>,
    pub low: Vec<u64>,
    pub payback: Vec<Payback>,
}

impl Default for FairnessSection {
    fn default() -> Self {
        FairnessSection::from_config(&FairnessConfig::default())
    }
}

impl FairnessSection {
    pub fn from_config(cfg: &FairnessConfig) -> FairnessSection {
        FairnessSection {
            high: cfg.queues.iter().map(|q| Watermark(q.high)).collect(),
            low: cfg.queues.iter().map(|q| q.low).collect(),
            payback: cfg.queues.iter().map(|q| Payback(q.payback)).collect(),
        }
    }

    pub fn to_config(&self) -> Result<FairnessConfig, ConfigError> {
        for (key, len) in
            [("high", self.high.len()), ("low", self.low.len()), ("payback", self.payback.len())]
        {
            if len != LEVELS {
                return Err(ConfigError::Field {
                    key: match key {
                        "high" => "fairness.high",
                        "low" => "fairness.low",
                        _ => "fairness.payback",
                    },
                    msg: format!("expected {LEVELS} entries, got {len}"),
                });
            }
        }
        let queues = std::array::from_fn(|i| QueueFairness {
            high: self.high[i].0,
            low: self.low[i],
            payback: self.payback[i].0,
        });
        let cfg = FairnessConfig { queues };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Optional congestion-shed monitor: when smoothed RTT stays above
/// `srtt_factor` x rt_prop for `trigger_rtts` round trips, the standing queue
/// estimate is shed from the lowest-priority queues.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShedMonitor {
    pub enabled: bool,
    pub srtt_factor: f64,
    pub trigger_rtts: u32,
}

impl Default for ShedMonitor {
    fn default() -> Self {
        ShedMonitor { enabled: false, srtt_factor: 4.0, trigger_rtts: 3 }
    }
}

/// One run's scenario: scheme, path, transport, fairness, and workload.
/// Doubles as the TOML file schema; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    /// Reserved for workloads with randomized arrivals; echoed and hashed.
    pub seed: u64,
    pub base_rtt_ms: f64,
    pub bottleneck_bps: u64,
    pub access_bps: u64,
    pub access_delay_ms: f64,
    /// Bottleneck drop-tail queue, in packets.
    pub queue_capacity: usize,
    pub mss: u32,
    pub send_buffer: u64,
    /// Baseline feeder burst: at most this many bytes per buffer-space signal.
    pub write_chunk: u64,
    pub min_rto_ms: u64,
    pub max_rto_ms: u64,
    pub cls_threshold_ms: f64,
    /// Non-termination guard; exceeding it aborts with a trace dump.
    pub event_cap: u64,
    /// Cut the run off at this instant; groups still pending report no
    /// completion. `None` runs to quiescence.
    pub stop_at_ms: Option<f64>,
    pub fairness: FairnessSection,
    pub shed_monitor: ShedMonitor,
    /// `None` selects the built-in five-group webpage.
    pub workload: Option<WorkloadFile>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::reference_preset(Scheme::Cats)
    }
}

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("workload: {0}")]
    Workload(#[from] WorkloadError),
    #[error("fairness: {0}")]
    Fairness(#[from] FairnessConfigError),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("{key}: {msg}")]
    Field { key: &'static str, msg: String },
}

impl ExperimentConfig {
    /// The reference scenario: 2 Mbps bottleneck, 50 ms base RTT, 100 Mbps
    /// access links, 100-packet drop-tail queue, five-group webpage.
    pub fn reference_preset(scheme: Scheme) -> ExperimentConfig {
        ExperimentConfig {
            scheme,
            seed: 0,
            base_rtt_ms: 50.0,
            bottleneck_bps: 2_000_000,
            access_bps: 100_000_000,
            access_delay_ms: 1.0,
            queue_capacity: 100,
            mss: 1448,
            send_buffer: 64 * 1024,
            write_chunk: 64 * 1024,
            min_rto_ms: 200,
            max_rto_ms: 60_000,
            cls_threshold_ms: 400.0,
            event_cap: 50_000_000,
            stop_at_ms: None,
            fairness: FairnessSection::default(),
            shed_monitor: ShedMonitor::default(),
            workload: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn resolved_workload(&self) -> Result<WorkloadSpec, ConfigError> {
        let spec = match &self.workload {
            None => WorkloadSpec::webpage(),
            Some(file) => file.clone().into_spec()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dumbbell(&self) -> Result<DumbbellConfig, ConfigError> {
        Ok(DumbbellConfig::from_budget(
            self.bottleneck_bps,
            SimTime::from_millis_f64(self.base_rtt_ms),
            self.access_bps,
            SimTime::from_millis_f64(self.access_delay_ms),
            self.queue_capacity,
        )?)
    }

    pub fn transport(&self) -> TransportConfig {
        TransportConfig {
            mss: self.mss,
            send_buffer: self.send_buffer,
            min_rto: SimTime::from_millis(self.min_rto_ms),
            max_rto: SimTime::from_millis(self.max_rto_ms),
        }
    }

    pub fn fairness_config(&self) -> Result<FairnessConfig, ConfigError> {
        self.fairness.to_config()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn field(key: &'static str, msg: impl Into<String>) -> ConfigError {
            ConfigError::Field { key, msg: msg.into() }
        }
        if self.mss == 0 {
            return Err(field("mss", "must be positive"));
        }
        if self.send_buffer < self.mss as u64 {
            return Err(field("send_buffer", "must hold at least one MSS"));
        }
        if self.write_chunk < self.mss as u64 {
            return Err(field("write_chunk", "must be at least one MSS"));
        }
        if self.min_rto_ms == 0 || self.min_rto_ms > self.max_rto_ms {
            return Err(field("min_rto_ms", "need 0 < min_rto_ms <= max_rto_ms"));
        }
        if self.event_cap == 0 {
            return Err(field("event_cap", "must be positive"));
        }
        if self.cls_threshold_ms.is_nan() || self.cls_threshold_ms < 0.0 {
            return Err(field("cls_threshold_ms", "must be non-negative"));
        }
        if let Some(stop) = self.stop_at_ms {
            if stop.is_nan() || stop <= 0.0 {
                return Err(field("stop_at_ms", "must be positive when set"));
            }
        }
        if self.shed_monitor.enabled {
            if self.shed_monitor.srtt_factor.is_nan() || self.shed_monitor.srtt_factor <= 1.0 {
                return Err(field("shed_monitor.srtt_factor", "must exceed 1"));
            }
            if self.shed_monitor.trigger_rtts == 0 {
                return Err(field("shed_monitor.trigger_rtts", "must be positive"));
            }
        }
        self.fairness_config()?;
        self.dumbbell()?;
        self.resolved_workload()?;
        Ok(())
    }

    /// Config echoed into the report: the workload is materialized so a run
    /// on the default webpage spells its assumptions out.
    pub fn echo_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let spec = self.resolved_workload().expect("validated config");
        v["workload"] =
            serde_json::to_value(WorkloadFile::from_spec(&spec)).expect("workload serializes");
        v
    }

    /// Scenario identity. The scheme is normalized out so a cats/baseline
    /// pair over the same scenario hashes identically; every other knob,
    /// the materialized workload included, is covered.
    pub fn config_hash(&self) -> String {
        let mut v = self.echo_json();
        v["scheme"] = serde_json::Value::String("-".into());
        // serde_json maps iterate in sorted key order, so this is canonical.
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_preset_hash_pairs_schemes_and_splits_scenarios() {
        let cats = ExperimentConfig::reference_preset(Scheme::Cats);
        let base = ExperimentConfig::reference_preset(Scheme::Baseline);
        assert_eq!(cats.config_hash(), base.config_hash());

        let mut narrower = cats.clone();
        narrower.bottleneck_bps = 1_000_000;
        assert_ne!(cats.config_hash(), narrower.config_hash());
    }

    #[test]
    fn explicit_default_workload_hashes_like_the_implicit_one() {
        let implicit = ExperimentConfig::reference_preset(Scheme::Cats);
        let mut explicit = implicit.clone();
        explicit.workload =
            Some(WorkloadFile::from_spec(&crate::workload::WorkloadSpec::webpage()));
        assert_eq!(implicit.config_hash(), explicit.config_hash());
    }

    #[test]
    fn toml_overrides_parse_including_fairness_forms() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            scheme = "baseline"
            bottleneck_bps = 1000000
            [fairness]
            high = ["unbounded", 1000, 500, 250, 125]
            low = [0, 500, 250, 125, 60]
            payback = [1, 1, "3/2", 4, 8]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scheme, Scheme::Baseline);
        assert_eq!(cfg.bottleneck_bps, 1_000_000);
        let fc = cfg.fairness_config().unwrap();
        assert_eq!(fc.queues[0].high, None);
        assert_eq!(fc.queues[2].payback, Ratio::new(3, 2));
        assert_eq!(fc.queues[4].low, 60);
    }

    #[test]
    fn unknown_keys_are_named_in_the_diagnostic() {
        let err = ExperimentConfig::from_toml_str("bottleneck = 5").unwrap_err();
        assert!(err.to_string().contains("bottleneck"), "got: {err}");
    }

    #[test]
    fn validation_names_the_offending_key() {
        let mut cfg = ExperimentConfig::reference_preset(Scheme::Cats);
        cfg.send_buffer = 100;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("send_buffer"), "got: {err}");

        let mut cfg = ExperimentConfig::reference_preset(Scheme::Cats);
        cfg.fairness.low[1] = u64::MAX;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::reference_preset(Scheme::Cats);
        cfg.base_rtt_ms = 1.0;
        assert!(matches!(cfg.validate(), Err(ConfigError::Topology(_))));
    }

    #[test]
    fn watermark_and_payback_round_trip_through_serde() {
        let section = FairnessSection::default();
        let json = serde_json::to_string(&section).unwrap();
        let back: FairnessSection = serde_json::from_str(&json).unwrap();
        assert_eq!(section, back);
        assert!(json.contains("\"unbounded\""));
    }
}
