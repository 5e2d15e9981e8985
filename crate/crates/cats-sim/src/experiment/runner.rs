//! The run engine: one sender and one receiver joined by a dumbbell, driven
//! by a single event queue until the page finishes (or a stop time / event
//! cap cuts the run short).
//!
//! The sender side composes the whole stack: application submissions enter
//! either the Conductor (cats) or a plain FIFO backlog (baseline), a feeder
//! moves them into the transport send buffer, and the congestion controller
//! gates each wire transmission. Everything observable lands in a
//! [`RunReport`](crate::metrics::RunReport).

use std::collections::VecDeque;
use std::io::Write as _;

use bytes::{Bytes, BytesMut};
use thiserror::Error;

use crate::cc::{Bbr, BbrConfig};
use crate::conductor::{Conductor, Priority, ShedChunk, LEVELS};
use crate::metrics::{
    self, GroupReport, QoeSummary, RunReport, WireStats,
};
use crate::net::{
    build_dumbbell, measure_base_rtt, Endpoint, LinkId, Packet, SubmitOutcome, Topology,
};
use crate::sim::{EventHandle, EventQueue, SimTime};
use crate::transport::receiver::Receiver;
use crate::transport::Connection;
use crate::wire::{decode_segment, Segment};
use crate::workload::{fill_pattern, WorkloadSpec};

use super::config::{ConfigError, ExperimentConfig, Scheme};
use super::trace::{EventRing, RingEvent, TraceSinks};

#[derive(Debug)]
enum Ev {
    TxDone(LinkId),
    Deliver { link: LinkId, packet: Packet },
    Submit { group: usize },
    Send,
    RtoFire,
}

#[derive(Error, Debug)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("event cap {cap} exceeded at {at_ns} ns; recent events:\n{dump}")]
    EventCap { cap: u64, at_ns: u64, dump: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Report(#[from] crate::metrics::ReportIoError),
}

/// Contiguous sender-stream span [previous end, `end`) fed by `group`;
/// `pattern_end` is the group-pattern position matching `end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamInterval {
    pub end: u64,
    pub group: usize,
    pub pattern_end: u64,
}

/// Maps sender stream offsets back to workload groups.
#[derive(Default)]
struct FlowTracker {
    intervals: Vec<StreamInterval>,
    /// Cats: per-level mirror of the conductor queues as
    /// (group, next pattern position, bytes not yet fed).
    mirror: [VecDeque<(usize, u64, u64)>; LEVELS],
}

impl FlowTracker {
    fn on_fed(&mut self, offset: u64, len: u64, group: usize, pattern_end: u64) {
        debug_assert_eq!(offset, self.intervals.last().map_or(0, |iv| iv.end));
        if let Some(last) = self.intervals.last_mut() {
            if last.group == group && last.pattern_end + len == pattern_end {
                last.end += len;
                last.pattern_end = pattern_end;
                return;
            }
        }
        self.intervals.push(StreamInterval { end: offset + len, group, pattern_end });
    }
}

/// Baseline application stream: submissions concatenated in arrival order,
/// sliced into MSS pieces with no respect for group boundaries.
#[derive(Default)]
struct BaselineBacklog {
    /// (group, next pattern position, remaining bytes)
    chunks: VecDeque<(usize, u64, u64)>,
    total: u64,
}

impl BaselineBacklog {
    fn push(&mut self, group: usize, pattern_start: u64, len: u64) {
        self.chunks.push_back((group, pattern_start, len));
        self.total += len;
    }

    /// Assemble exactly `take` bytes from the front; returns the payload and
    /// its (group, pattern_end, span_len) parts in order.
    fn next_piece(&mut self, take: u64) -> (Bytes, Vec<(usize, u64, u64)>) {
        assert!(take > 0 && take <= self.total);
        let mut payload = BytesMut::with_capacity(take as usize);
        let mut spans = Vec::new();
        let mut left = take;
        while left > 0 {
            let front = self.chunks.front_mut().expect("backlog holds enough");
            let n = front.2.min(left);
            payload.extend_from_slice(&fill_pattern(front.0, front.1, n as usize));
            spans.push((front.0, front.1 + n, n));
            front.1 += n;
            front.2 -= n;
            left -= n;
            if front.2 == 0 {
                self.chunks.pop_front();
            }
        }
        self.total -= take;
        (payload.freeze(), spans)
    }
}

struct GroupRuntime {
    label: String,
    priority: Priority,
    pending_submissions: u32,
    submitted_bytes: u64,
    submitted_at: Option<SimTime>,
    first_tx: Option<SimTime>,
    completed_at: Option<SimTime>,
    fed_bytes: u64,
    shed_bytes: u64,
    max_fed_end: u64,
}

/// Everything a finished run hands back: the report plus raw material for
/// content verification.
pub struct RunOutput {
    pub report: RunReport,
    /// In-order byte stream the receiving application saw.
    pub receiver_stream: Vec<u8>,
    /// Sender-stream attribution spans.
    pub intervals: Vec<StreamInterval>,
}

/// Check every delivered in-order byte against the workload pattern it was
/// fed from. Returns the first mismatching stream offset.
pub fn verify_delivered_stream(out: &RunOutput) -> Result<(), u64> {
    let stream = &out.receiver_stream;
    let mut start = 0u64;
    for iv in &out.intervals {
        let end = iv.end.min(stream.len() as u64);
        for x in start..end {
            let expected = crate::workload::pattern_byte(iv.group, iv.pattern_end - (iv.end - x));
            if stream[x as usize] != expected {
                return Err(x);
            }
        }
        start = iv.end;
        if start >= stream.len() as u64 {
            break;
        }
    }
    Ok(())
}

pub struct Simulation {
    cfg: ExperimentConfig,
    workload: WorkloadSpec,
    topo: Topology,
    conn: Connection,
    recv: Receiver,
    cc: Bbr,
    conductor: Option<Conductor>,
    backlog: BaselineBacklog,
    tracker: FlowTracker,
    groups: Vec<GroupRuntime>,
    submissions: Vec<(SimTime, usize)>,
    last_tx: Option<SimTime>,
    next_send: Option<(EventHandle, SimTime)>,
    next_rto: Option<(EventHandle, SimTime)>,
    shed_above_since: Option<SimTime>,
    bottleneck_log: Vec<(SimTime, u64)>,
    base_rtt_probe: SimTime,
    handshake_done: Option<SimTime>,
    config_hash: String,
    config_echo: serde_json::Value,
    sinks: TraceSinks,
    ring: EventRing,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    run_traced(cfg, TraceSinks::none())
}

pub fn run_traced(cfg: &ExperimentConfig, sinks: TraceSinks) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    Simulation::new(cfg.clone(), sinks)?.run()
}

impl Simulation {
    fn new(cfg: ExperimentConfig, sinks: TraceSinks) -> Result<Simulation, RunError> {
        let workload = cfg.resolved_workload()?;
        let dumbbell = cfg.dumbbell()?;
        let base_rtt_probe = {
            let mut probe_topo =
                build_dumbbell(&dumbbell).map_err(ConfigError::Topology)?;
            measure_base_rtt(&mut probe_topo)
        };
        let topo = build_dumbbell(&dumbbell).map_err(ConfigError::Topology)?;
        let conductor = match cfg.scheme {
            Scheme::Cats => Some(
                Conductor::new(cfg.fairness_config()?).expect("validated fairness"),
            ),
            Scheme::Baseline => None,
        };
        let groups = workload
            .groups
            .iter()
            .map(|g| GroupRuntime {
                label: g.label.clone(),
                priority: g.priority,
                pending_submissions: 1 + g.repeat.map_or(0, |r| r.count),
                submitted_bytes: 0,
                submitted_at: None,
                first_tx: None,
                completed_at: None,
                fed_bytes: 0,
                shed_bytes: 0,
                max_fed_end: 0,
            })
            .collect();
        // All submission instants up front, ordered by time with the
        // workload's submission order breaking ties.
        let mut submissions: Vec<(SimTime, usize, usize)> = Vec::new();
        for (rank, &gi) in workload.submission_order.iter().enumerate() {
            let g = &workload.groups[gi];
            let reps = 1 + g.repeat.map_or(0, |r| r.count);
            let interval = g.repeat.map_or(SimTime::ZERO, |r| r.interval);
            for k in 0..reps {
                submissions.push((workload.submitted_at + interval * k as u64, rank, gi));
            }
        }
        submissions.sort_by_key(|&(at, rank, _)| (at, rank));
        let submissions = submissions.into_iter().map(|(at, _, gi)| (at, gi)).collect();
        Ok(Simulation {
            conn: Connection::new(cfg.transport()),
            recv: Receiver::new(),
            cc: Bbr::new(BbrConfig { mss: cfg.mss, ..BbrConfig::default() }),
            conductor,
            backlog: BaselineBacklog::default(),
            tracker: FlowTracker::default(),
            groups,
            submissions,
            last_tx: None,
            next_send: None,
            next_rto: None,
            shed_above_since: None,
            bottleneck_log: Vec::new(),
            base_rtt_probe,
            handshake_done: None,
            config_hash: cfg.config_hash(),
            config_echo: cfg.echo_json(),
            sinks,
            ring: EventRing::new(64),
            workload,
            topo,
            cfg,
        })
    }

    fn run(mut self) -> Result<RunOutput, RunError> {
        let mut q: EventQueue<Ev> = EventQueue::new();
        for &(at, group) in &self.submissions {
            q.schedule_at(at, Ev::Submit { group });
        }
        let syn = self.conn.start_handshake(SimTime::ZERO);
        self.send_from_sender(&mut q, syn, SimTime::ZERO);
        self.sync_rto(&mut q, SimTime::ZERO);

        let deadline = self
            .cfg
            .stop_at_ms
            .map_or(SimTime::from_nanos(u64::MAX), SimTime::from_millis_f64);
        while let Some((now, ev)) = q.pop_due(deadline) {
            if q.dispatched() > self.cfg.event_cap {
                let _ = self.sinks.flush();
                return Err(RunError::EventCap {
                    cap: self.cfg.event_cap,
                    at_ns: now.as_nanos(),
                    dump: self.ring.dump(),
                });
            }
            self.dispatch(&mut q, now, ev);
        }
        self.sinks.flush()?;
        Ok(self.into_output(q.dispatched()))
    }

    fn dispatch(&mut self, q: &mut EventQueue<Ev>, now: SimTime, ev: Ev) {
        match ev {
            Ev::Submit { group } => {
                self.note(now, "submit", group as u64, 0);
                self.on_submit(q, now, group);
            }
            Ev::TxDone(link) => {
                self.note(now, "tx_done", link.0 as u64, 0);
                self.on_tx_done(q, now, link);
            }
            Ev::Deliver { link, packet } => {
                self.note(now, "deliver", link.0 as u64, packet.size_on_wire);
                self.on_deliver(q, now, link, packet);
            }
            Ev::Send => {
                self.note(now, "send", 0, 0);
                self.next_send = None;
                self.try_send(q, now);
            }
            Ev::RtoFire => {
                self.note(now, "rto", 0, 0);
                self.on_rto(q, now);
            }
        }
    }

    fn note(&mut self, now: SimTime, kind: &'static str, a: u64, b: u64) {
        self.ring.push(RingEvent { at: now, kind, a, b });
        if let Some(sink) = self.sinks.events.as_mut() {
            let _ = writeln!(sink, "{} net {} a={} b={}", now.as_nanos(), kind, a, b);
        }
    }

    fn on_submit(&mut self, q: &mut EventQueue<Ev>, now: SimTime, group: usize) {
        let size = self.workload.groups[group].size;
        let rt = &mut self.groups[group];
        rt.submitted_at.get_or_insert(now);
        let pattern_start = rt.submitted_bytes;
        rt.submitted_bytes += size;
        rt.pending_submissions -= 1;
        let priority = rt.priority;
        match self.cfg.scheme {
            Scheme::Cats => {
                let payload = fill_pattern(group, pattern_start, size as usize);
                self.conductor
                    .as_mut()
                    .expect("cats runs carry a conductor")
                    .intercept(payload, priority, now)
                    .expect("workload groups are non-empty");
                self.tracker.mirror[priority.index()].push_back((group, pattern_start, size));
            }
            Scheme::Baseline => {
                self.backlog.push(group, pattern_start, size);
                self.pump(now);
            }
        }
        self.try_send(q, now);
    }

    /// Baseline application: write eagerly whenever the socket buffer has
    /// room, up to `write_chunk` per wakeup, committing send order early.
    fn pump(&mut self, now: SimTime) {
        let _ = now;
        if self.cfg.scheme != Scheme::Baseline {
            return;
        }
        let mss = self.conn.mss() as u64;
        let mut budget = self.cfg.write_chunk;
        loop {
            if self.backlog.total == 0 {
                break;
            }
            let take = mss.min(self.backlog.total);
            if budget < take || self.conn.free_space() < take {
                break;
            }
            let (payload, spans) = self.backlog.next_piece(take);
            let outcome = self.conn.feed(payload, None).expect("pieces are MSS-bounded");
            let crate::transport::FeedOutcome::Accepted { offset, .. } = outcome else {
                break;
            };
            let mut acc = 0u64;
            for (group, pattern_end, span_len) in spans {
                let rt = &mut self.groups[group];
                rt.fed_bytes += span_len;
                rt.max_fed_end = offset + acc + span_len;
                self.tracker.on_fed(offset + acc, span_len, group, pattern_end);
                acc += span_len;
            }
            budget -= take;
        }
    }

    /// Cats feeder: bind exactly one scheduling decision to the transport,
    /// at the send instant. Everything else stays in the priority queues
    /// where later, more urgent submissions can still overtake it.
    fn stage_cats_slice(&mut self, now: SimTime) -> bool {
        let mss = self.conn.mss() as usize;
        let Some(conductor) = self.conductor.as_mut() else { return false };
        let Some(sel) = conductor.select_next(mss) else { return false };
        let len = sel.payload.len() as u64;
        if self.conn.free_space() < len {
            return false;
        }
        let level = sel.queue;
        let outcome =
            self.conn.feed(sel.payload, Some(level)).expect("conductor slices are MSS-bounded");
        let crate::transport::FeedOutcome::Accepted { offset, .. } = outcome else {
            return false;
        };
        conductor.commit_send(level, len as usize);
        let entry = self.tracker.mirror[level.index()]
            .front_mut()
            .expect("mirror tracks every queued chunk");
        let group = entry.0;
        entry.1 += len;
        entry.2 -= len;
        let pattern_end = entry.1;
        if entry.2 == 0 {
            self.tracker.mirror[level.index()].pop_front();
        }
        let rt = &mut self.groups[group];
        rt.fed_bytes += len;
        rt.max_fed_end = offset + len;
        self.tracker.on_fed(offset, len, group, pattern_end);
        if let Some(sink) = self.sinks.schedule.as_mut() {
            let conductor = self.conductor.as_ref().expect("cats");
            let d = conductor.ledger().debts();
            let s = conductor.ledger().states();
            let _ = writeln!(
                sink,
                "{} q={} n={} D=[{},{},{},{},{}] S=[{:?},{:?},{:?},{:?},{:?}]",
                now.as_nanos(),
                level.level(),
                len,
                d[0], d[1], d[2], d[3], d[4],
                s[0], s[1], s[2], s[3], s[4],
            );
        }
        true
    }

    fn has_app_backlog(&self) -> bool {
        match self.cfg.scheme {
            Scheme::Cats => self.conductor.as_ref().is_some_and(|c| !c.is_empty()),
            Scheme::Baseline => self.backlog.total > 0,
        }
    }

    /// Transmit under the congestion controller's budget; reschedules itself
    /// through `Ev::Send` when pacing says later.
    fn try_send(&mut self, q: &mut EventQueue<Ev>, now: SimTime) {
        if !self.conn.established() {
            return;
        }
        loop {
            let budget = self.cc.send_budget(self.conn.in_flight_bytes(), self.last_tx);
            if !budget.allowed {
                return;
            }
            if budget.earliest > now {
                if self.conn.has_unsent() || self.has_app_backlog() {
                    self.ensure_send(q, budget.earliest);
                }
                return;
            }
            if !self.conn.has_unsent() {
                let staged = match self.cfg.scheme {
                    Scheme::Cats => self.stage_cats_slice(now),
                    Scheme::Baseline => {
                        self.pump(now);
                        self.conn.has_unsent()
                    }
                };
                if !staged {
                    self.conn.mark_app_limited();
                    return;
                }
            }
            let seg = self.conn.transmit_next(now).expect("has unsent data");
            let a = seg.header.seq as u64;
            let b = a + seg.payload.len() as u64;
            self.mark_first_tx(a, b, now);
            self.last_tx = Some(now);
            self.send_from_sender(q, seg, now);
            self.sync_rto(q, now);
        }
    }

    fn mark_first_tx(&mut self, a: u64, b: u64, now: SimTime) {
        let ivs = &self.tracker.intervals;
        let mut idx = ivs.partition_point(|iv| iv.end <= a);
        let mut start = if idx == 0 { 0 } else { ivs[idx - 1].end };
        while idx < self.tracker.intervals.len() && start < b {
            let iv = self.tracker.intervals[idx];
            self.groups[iv.group].first_tx.get_or_insert(now);
            start = iv.end;
            idx += 1;
        }
    }

    fn ensure_send(&mut self, q: &mut EventQueue<Ev>, at: SimTime) {
        if let Some((handle, t)) = self.next_send {
            if t <= at {
                return;
            }
            q.cancel(handle);
        }
        let handle = q.schedule_at(at, Ev::Send);
        self.next_send = Some((handle, at));
    }

    fn send_from_sender(&mut self, q: &mut EventQueue<Ev>, seg: Segment, now: SimTime) {
        let packet = Packet::from_segment(&seg, now);
        let hop = self.topo.first_hop(Endpoint::Sender);
        self.submit_on(q, hop, packet, now);
    }

    fn submit_on(&mut self, q: &mut EventQueue<Ev>, link: LinkId, packet: Packet, now: SimTime) {
        match self.topo.link_mut(link).submit(packet, now) {
            SubmitOutcome::Started(ts) => {
                q.schedule_at(ts.done_at, Ev::TxDone(link));
            }
            SubmitOutcome::Queued => {}
            SubmitOutcome::Dropped => self.note(now, "drop", link.0 as u64, 0),
        }
    }

    fn on_tx_done(&mut self, q: &mut EventQueue<Ev>, now: SimTime, link: LinkId) {
        let done = self.topo.link_mut(link).on_tx_done(now);
        if link == self.topo.bottleneck() {
            self.bottleneck_log.push((now, done.delivered.size_on_wire));
        }
        q.schedule_at(done.deliver_at, Ev::Deliver { link, packet: done.delivered });
        if let Some(next) = done.next {
            q.schedule_at(next.done_at, Ev::TxDone(link));
        }
    }

    fn on_deliver(&mut self, q: &mut EventQueue<Ev>, now: SimTime, link: LinkId, packet: Packet) {
        match self.topo.next_hop(link) {
            Ok(next) => self.submit_on(q, next, packet, now),
            Err(Endpoint::Receiver) => self.deliver_to_receiver(q, now, packet),
            Err(Endpoint::Sender) => self.deliver_to_sender(q, now, packet),
        }
    }

    fn deliver_to_receiver(&mut self, q: &mut EventQueue<Ev>, now: SimTime, packet: Packet) {
        let seg = decode_segment(&packet.payload).expect("simulated frames are well-formed");
        if let Some(reply) = self.recv.on_segment(&seg) {
            let reply_packet = Packet::from_segment(&reply, now);
            let hop = self.topo.first_hop(Endpoint::Receiver);
            self.submit_on(q, hop, reply_packet, now);
        }
        let delivered = self.recv.stream_len();
        for rt in &mut self.groups {
            if rt.completed_at.is_none()
                && rt.pending_submissions == 0
                && rt.fed_bytes > 0
                && rt.fed_bytes + rt.shed_bytes == rt.submitted_bytes
                && rt.max_fed_end <= delivered
            {
                rt.completed_at = Some(now);
            }
        }
    }

    fn deliver_to_sender(&mut self, q: &mut EventQueue<Ev>, now: SimTime, packet: Packet) {
        let seg = decode_segment(&packet.payload).expect("simulated frames are well-formed");
        if seg.header.flags.syn {
            if let Some(rtt) = self.conn.on_synack(now) {
                self.cc.note_rtt(rtt, now);
            }
            self.handshake_done.get_or_insert(now);
            self.sync_rto(q, now);
            self.pump(now);
            self.try_send(q, now);
            return;
        }
        let out = self.conn.on_ack(seg.header.ack, now);
        if let Some(sample) = out.delivery.as_ref() {
            self.cc.on_delivery(sample, self.conn.in_flight_bytes(), now);
            if let Some(sink) = self.sinks.cc.as_mut() {
                let snap = self.cc.snapshot();
                let _ = writeln!(
                    sink,
                    "{},{:?},{},{:.3},{},{},{}",
                    now.as_nanos(),
                    snap.phase,
                    snap.btl_bw_bps,
                    snap.rt_prop_ms,
                    snap.pacing_rate_bps,
                    snap.cwnd_bytes,
                    self.conn.in_flight_bytes(),
                );
            }
        }
        if let Some(retx) = out.fast_retransmit {
            self.note(now, "fast_retx", retx.header.seq as u64, 0);
            self.last_tx = Some(now);
            self.send_from_sender(q, retx, now);
        }
        if out.info.rtt_sample.is_some() {
            self.shed_check(now);
        }
        if out.freed_space > 0 {
            self.pump(now);
        }
        self.sync_rto(q, now);
        self.try_send(q, now);
    }

    /// Congestion shedding: smoothed RTT pinned above `srtt_factor` x rt_prop
    /// for `trigger_rtts` round trips sheds the standing-queue estimate.
    fn shed_check(&mut self, now: SimTime) {
        if self.cfg.scheme != Scheme::Cats || !self.cfg.shed_monitor.enabled {
            return;
        }
        let (Some(srtt), Some(rt_prop)) = (self.conn.srtt(), self.cc.rt_prop()) else {
            return;
        };
        let bar = SimTime::from_nanos(
            (rt_prop.as_nanos() as f64 * self.cfg.shed_monitor.srtt_factor) as u64,
        );
        if srtt <= bar {
            self.shed_above_since = None;
            return;
        }
        let since = *self.shed_above_since.get_or_insert(now);
        if now.saturating_sub(since) < rt_prop * self.cfg.shed_monitor.trigger_rtts as u64 {
            return;
        }
        let standing = srtt.saturating_sub(rt_prop).as_nanos() as u128;
        let bytes = (standing * self.cc.btl_bw_bps() as u128 / 8_000_000_000) as u64;
        if bytes > 0 {
            let sheds =
                self.conductor.as_mut().expect("cats").shed_on_congestion(bytes);
            self.apply_sheds(&sheds, now);
        }
        self.shed_above_since = None;
    }

    fn apply_sheds(&mut self, sheds: &[ShedChunk], now: SimTime) {
        for shed in sheds {
            let entry = self.tracker.mirror[shed.priority.index()]
                .pop_front()
                .expect("mirror tracks every queued chunk");
            debug_assert_eq!(entry.2, shed.bytes);
            self.groups[entry.0].shed_bytes += shed.bytes;
            self.note(now, "shed", shed.priority.level() as u64, shed.bytes);
        }
    }

    fn on_rto(&mut self, q: &mut EventQueue<Ev>, now: SimTime) {
        self.next_rto = None;
        if let Some(seg) = self.conn.on_rto_fire(now) {
            self.last_tx = Some(now);
            self.send_from_sender(q, seg, now);
        }
        self.sync_rto(q, now);
    }

    fn sync_rto(&mut self, q: &mut EventQueue<Ev>, _now: SimTime) {
        let want = self.conn.rto_deadline();
        match (self.next_rto, want) {
            (Some((_, t)), Some(w)) if t == w => {}
            (None, None) => {}
            _ => {
                if let Some((handle, _)) = self.next_rto.take() {
                    q.cancel(handle);
                }
                if let Some(w) = want {
                    let handle = q.schedule_at(w, Ev::RtoFire);
                    self.next_rto = Some((handle, w));
                }
            }
        }
    }

    fn into_output(self, events_dispatched: u64) -> RunOutput {
        let groups: Vec<GroupReport> = self
            .groups
            .iter()
            .map(|rt| {
                let delivered_bytes = rt.submitted_bytes - rt.shed_bytes;
                let submitted_at_ms =
                    rt.submitted_at.map_or(0.0, |t| t.as_millis_f64());
                let first_transmit_ms = rt.first_tx.map(|t| t.as_millis_f64());
                let completed_at_ms = rt.completed_at.map(|t| t.as_millis_f64());
                let effective = match (first_transmit_ms, completed_at_ms) {
                    (Some(ft), Some(done)) => {
                        metrics::effective_throughput_bps(delivered_bytes, ft, done)
                    }
                    _ => None,
                };
                let delivery = completed_at_ms.and_then(|done| {
                    metrics::delivery_throughput_bps(delivered_bytes, submitted_at_ms, done)
                });
                GroupReport {
                    label: rt.label.clone(),
                    priority: rt.priority.level(),
                    bytes: rt.submitted_bytes,
                    submitted_at_ms,
                    first_transmit_ms,
                    completed_at_ms,
                    shed_bytes: rt.shed_bytes,
                    effective_throughput_bps: effective,
                    delivery_throughput_bps: delivery,
                }
            })
            .collect();
        let qoe = QoeSummary::from_groups(&groups, self.cfg.cls_threshold_ms);
        let total_completion_ms = metrics::total_completion_ms(&groups);
        let steady_rate_bps = total_completion_ms.and_then(|total_ms| {
            let total = SimTime::from_millis_f64(total_ms);
            let lo = total / 10 * 3;
            let hi = total / 10 * 9;
            if hi <= lo {
                return None;
            }
            let bytes: u64 = self
                .bottleneck_log
                .iter()
                .filter(|&&(t, _)| lo <= t && t <= hi)
                .map(|&(_, b)| b)
                .sum();
            Some(bytes as f64 * 8.0 / (hi - lo).as_secs_f64())
        });
        let bn = self.topo.bottleneck();
        let bn_counters = self.topo.link(bn).counters();
        let wire = WireStats {
            segments_sent: self.conn.counters().segments_sent,
            retransmits: self.conn.counters().retransmits,
            dup_acks: self.conn.counters().dup_acks,
            rto_firings: self.conn.counters().rto_firings,
            protocol_errors: self.conn.counters().protocol_errors,
            bottleneck_bytes_forwarded: bn_counters.bytes_forwarded,
            bottleneck_drops: bn_counters.dropped,
            bottleneck_peak_queue: self.topo.link(bn).peak_queue(),
            tagged_segments: self.recv.option_counts(),
        };
        let report = RunReport {
            scheme: self.cfg.scheme.to_string(),
            config_hash: self.config_hash,
            config: self.config_echo,
            base_rtt_probe_ms: self.base_rtt_probe.as_millis_f64(),
            handshake_ms: self.handshake_done.map_or(0.0, |t| t.as_millis_f64()),
            total_completion_ms,
            steady_rate_bps,
            qoe,
            groups,
            wire,
            conductor: self.conductor.as_ref().map(|c| *c.counters()),
            cc: self.cc.snapshot(),
            events_dispatched,
        };
        RunOutput {
            report,
            receiver_stream: self.recv.stream().to_vec(),
            intervals: self.tracker.intervals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(scheme: Scheme) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference_preset(scheme);
        cfg.workload = Some(crate::workload::WorkloadFile::from_spec(&tiny_workload()));
        cfg
    }

    fn tiny_workload() -> WorkloadSpec {
        use crate::workload::GroupSpec;
        WorkloadSpec {
            groups: vec![
                GroupSpec {
                    label: "main".into(),
                    priority: Priority::P0,
                    size: 10_000,
                    repeat: None,
                },
                GroupSpec {
                    label: "extra".into(),
                    priority: Priority::P3,
                    size: 20_000,
                    repeat: None,
                },
            ],
            submission_order: vec![1, 0],
            submitted_at: SimTime::ZERO,
        }
    }

    #[test]
    fn tiny_cats_run_reaches_quiescence_and_verifies() {
        let out = run(&small_config(Scheme::Cats)).unwrap();
        assert_eq!(out.report.groups.len(), 2);
        for g in &out.report.groups {
            assert!(g.completed_at_ms.is_some(), "group {} unfinished", g.label);
        }
        assert_eq!(out.receiver_stream.len(), 30_000);
        verify_delivered_stream(&out).unwrap();
        // P0 overtakes the earlier-submitted P3 content.
        assert!(out.report.groups[0].completed_at_ms < out.report.groups[1].completed_at_ms);
        assert_eq!(out.report.base_rtt_probe_ms, 50.0);
    }

    #[test]
    fn tiny_baseline_run_preserves_submission_order() {
        let out = run(&small_config(Scheme::Baseline)).unwrap();
        verify_delivered_stream(&out).unwrap();
        assert_eq!(out.receiver_stream.len(), 30_000);
        // FIFO: the P3 group submitted first finishes first.
        assert!(out.report.groups[1].completed_at_ms < out.report.groups[0].completed_at_ms);
        assert!(out.report.conductor.is_none());
        assert_eq!(out.report.wire.tagged_segments, [0; 5]);
    }

    #[test]
    fn identical_runs_produce_identical_reports() {
        let a = run(&small_config(Scheme::Cats)).unwrap();
        let b = run(&small_config(Scheme::Cats)).unwrap();
        assert_eq!(a.report.to_json_string(), b.report.to_json_string());
    }

    #[test]
    fn event_cap_aborts_with_a_dump() {
        let mut cfg = small_config(Scheme::Cats);
        cfg.event_cap = 10;
        match run(&cfg) {
            Err(RunError::EventCap { cap: 10, dump, .. }) => {
                assert!(!dump.is_empty());
            }
            Err(other) => panic!("expected event-cap abort, got {other:?}"),
            Ok(_) => panic!("expected event-cap abort, run finished"),
        }
    }

    #[test]
    fn stop_time_leaves_unfinished_groups_unreported() {
        let mut cfg = small_config(Scheme::Cats);
        cfg.stop_at_ms = Some(60.0);
        let out = run(&cfg).unwrap();
        assert!(out.report.total_completion_ms.is_none());
        assert!(out.report.groups.iter().any(|g| g.completed_at_ms.is_none()));
    }
}
