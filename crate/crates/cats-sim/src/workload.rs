//! Workload description: what the application submits, when, and at which
//! priority.
//!
//! A workload is a set of named groups (one group = one application message,
//! optionally re-submitted on an interval for streaming-style traffic) plus
//! a submission order. Payload bytes come from a deterministic arithmetic
//! pattern so receivers can be checked byte-for-byte without carrying the
//! data around.

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conductor::Priority;
use crate::sim::SimTime;

pub const KIB: u64 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepeatSpec {
    pub interval: SimTime,
    /// Additional submissions after the first.
    pub count: u32,
}

#[derive(Clone, Debug)]
pub struct GroupSpec {
    pub label: String,
    pub priority: Priority,
    /// Bytes per submission.
    pub size: u64,
    pub repeat: Option<RepeatSpec>,
}

impl GroupSpec {
    pub fn total_bytes(&self) -> u64 {
        let times = 1 + self.repeat.map_or(0, |r| r.count) as u64;
        self.size * times
    }
}

#[derive(Clone, Debug)]
pub struct WorkloadSpec {
    pub groups: Vec<GroupSpec>,
    /// Indices into `groups` in the order the application submits them.
    pub submission_order: Vec<usize>,
    pub submitted_at: SimTime,
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("workload has no groups")]
    Empty,
    #[error("group {label:?} has zero size")]
    ZeroSize { label: String },
    #[error("group label {label:?} appears twice")]
    DuplicateLabel { label: String },
    #[error("submission_order must be a permutation of 0..{groups} (got {got:?})")]
    BadOrder { groups: usize, got: Vec<usize> },
    #[error("priority level {0} out of range 0..=4")]
    BadPriority(u8),
}

impl WorkloadSpec {
    /// The five-resource webpage download: sizes and priorities of the
    /// headline scenario, submitted in reverse priority order (analytics
    /// first) so the scheduler, not arrival luck, decides the outcome.
    pub fn webpage() -> WorkloadSpec {
        let g = |label: &str, p: Priority, kib: u64| GroupSpec {
            label: label.to_string(),
            priority: p,
            size: kib * KIB,
            repeat: None,
        };
        WorkloadSpec {
            groups: vec![
                g("html", Priority::P0, 8),
                g("css", Priority::P1, 25),
                g("js", Priority::P2, 40),
                g("images", Priority::P3, 60),
                g("analytics", Priority::P4, 150),
            ],
            submission_order: vec![4, 3, 2, 1, 0],
            submitted_at: SimTime::ZERO,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.groups.iter().map(|g| g.total_bytes()).sum()
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.groups.is_empty() {
            return Err(WorkloadError::Empty);
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.size == 0 {
                return Err(WorkloadError::ZeroSize { label: g.label.clone() });
            }
            if self.groups[..i].iter().any(|o| o.label == g.label) {
                return Err(WorkloadError::DuplicateLabel { label: g.label.clone() });
            }
        }
        let mut seen = vec![false; self.groups.len()];
        let ok = self.submission_order.len() == self.groups.len()
            && self.submission_order.iter().all(|&i| {
                let fresh = i < self.groups.len() && !seen[i];
                if fresh {
                    seen[i] = true;
                }
                fresh
            });
        if !ok {
            return Err(WorkloadError::BadOrder {
                groups: self.groups.len(),
                got: self.submission_order.clone(),
            });
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<WorkloadSpec, WorkloadFileError> {
        let file: WorkloadFile = toml::from_str(text)?;
        let spec = file.into_spec()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<WorkloadSpec, WorkloadFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorkloadFileError::Io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Error, Debug)]
pub enum WorkloadFileError {
    #[error("reading {0}: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] WorkloadError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadFile {
    #[serde(default)]
    submitted_at_ms: f64,
    /// Submission order by group label; defaults to listed order.
    submission_order: Option<Vec<String>>,
    group: Vec<GroupFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFile {
    label: String,
    priority: u8,
    size: u64,
    repeat_interval_ms: Option<f64>,
    repeat_count: Option<u32>,
}

impl WorkloadFile {
    /// File-level view of a spec, for echoing resolved configuration.
    pub fn from_spec(spec: &WorkloadSpec) -> WorkloadFile {
        WorkloadFile {
            submitted_at_ms: spec.submitted_at.as_millis_f64(),
            submission_order: Some(
                spec.submission_order
                    .iter()
                    .map(|&i| spec.groups[i].label.clone())
                    .collect(),
            ),
            group: spec
                .groups
                .iter()
                .map(|g| GroupFile {
                    label: g.label.clone(),
                    priority: g.priority.level(),
                    size: g.size,
                    repeat_interval_ms: g.repeat.map(|r| r.interval.as_millis_f64()),
                    repeat_count: g.repeat.map(|r| r.count),
                })
                .collect(),
        }
    }

    pub fn into_spec(self) -> Result<WorkloadSpec, WorkloadError> {
        let mut groups = Vec::with_capacity(self.group.len());
        for g in &self.group {
            let priority =
                Priority::new(g.priority).map_err(|_| WorkloadError::BadPriority(g.priority))?;
            let repeat = match (g.repeat_interval_ms, g.repeat_count) {
                (Some(ms), Some(count)) => {
                    Some(RepeatSpec { interval: SimTime::from_millis_f64(ms), count })
                }
                _ => None,
            };
            groups.push(GroupSpec { label: g.label.clone(), priority, size: g.size, repeat });
        }
        let submission_order = match &self.submission_order {
            None => (0..groups.len()).collect(),
            Some(labels) => labels
                .iter()
                .map(|l| {
                    groups.iter().position(|g| &g.label == l).ok_or_else(|| {
                        WorkloadError::BadOrder { groups: groups.len(), got: vec![] }
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(WorkloadSpec {
            groups,
            submission_order,
            submitted_at: SimTime::from_millis_f64(self.submitted_at_ms),
        })
    }
}

/// Deterministic payload byte at stream position `pos` of group `group`.
pub fn pattern_byte(group: usize, pos: u64) -> u8 {
    ((group as u64 * 41 + pos * 7) % 251) as u8
}

/// Payload for `len` bytes of `group` starting at intra-group offset `start`.
pub fn fill_pattern(group: usize, start: u64, len: usize) -> Bytes {
    (0..len as u64).map(|i| pattern_byte(group, start + i)).collect()
}
