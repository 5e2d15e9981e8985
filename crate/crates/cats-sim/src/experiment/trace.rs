//! Trace sinks: optional line-oriented logs of a run, plus the ring buffer
//! dumped when the event cap trips.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;

#[derive(Clone, Copy, Default, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// One line per dispatched simulation event.
    pub events: bool,
    /// One line per conductor commit: queue, bytes, debts, states.
    pub schedule: bool,
    /// CSV of congestion-controller state at each ACK.
    pub cc: bool,
}

impl TraceConfig {
    pub fn parse_flag(s: &str) -> Result<TraceConfig, String> {
        let mut cfg = TraceConfig::default();
        for part in s.split(',').filter(|p| !p.is_empty()) {
            match part.trim() {
                "events" => cfg.events = true,
                "schedule" => cfg.schedule = true,
                "cc" => cfg.cc = true,
                other => {
                    return Err(format!(
                        "unknown trace stream {other:?}, expected events, schedule, or cc"
                    ))
                }
            }
        }
        Ok(cfg)
    }

    pub fn any(self) -> bool {
        self.events || self.schedule || self.cc
    }
}

type Sink = BufWriter<File>;

/// Open sinks for the requested streams under `dir`.
pub struct TraceSinks {
    pub events: Option<Sink>,
    pub schedule: Option<Sink>,
    pub cc: Option<Sink>,
}

impl TraceSinks {
    pub fn none() -> TraceSinks {
        TraceSinks { events: None, schedule: None, cc: None }
    }

    pub fn open(dir: &Path, cfg: TraceConfig, prefix: &str) -> io::Result<TraceSinks> {
        let open = |on: bool, name: &str| -> io::Result<Option<Sink>> {
            if !on {
                return Ok(None);
            }
            let file = File::create(dir.join(format!("{prefix}.{name}.trace")))?;
            Ok(Some(BufWriter::new(file)))
        };
        let mut sinks = TraceSinks {
            events: open(cfg.events, "events")?,
            schedule: open(cfg.schedule, "schedule")?,
            cc: open(cfg.cc, "cc")?,
        };
        if let Some(cc) = sinks.cc.as_mut() {
            let _ = writeln!(cc, "ns,phase,btl_bw_bps,rt_prop_ms,pacing_bps,cwnd,inflight");
        }
        Ok(sinks)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        for sink in [&mut self.events, &mut self.schedule, &mut self.cc].into_iter().flatten() {
            sink.flush()?;
        }
        Ok(())
    }
}

/// Cheap record of one dispatched event, formatted only if a dump is needed.
#[derive(Clone, Copy, Debug)]
pub struct RingEvent {
    pub at: SimTime,
    pub kind: &'static str,
    pub a: u64,
    pub b: u64,
}

/// Last-N event ring kept on every run so an event-cap abort can show what
/// the simulation was doing.
pub struct EventRing {
    buf: VecDeque<RingEvent>,
    cap: usize,
}

impl EventRing {
    pub fn new(cap: usize) -> EventRing {
        EventRing { buf: VecDeque::with_capacity(cap), cap }
    }

    pub fn push(&mut self, ev: RingEvent) {
        if self.buf.len() == self.cap {
            self.buf.pop_front();
        }
        self.buf.push_back(ev);
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for ev in &self.buf {
            let _ = writeln!(out, "{} {} a={} b={}", ev.at.as_nanos(), ev.kind, ev.a, ev.b);
        }
        out
    }
}
