//! Point-to-point links and the dumbbell topology.
//!
//! A link serializes one packet at a time at its configured rate, then
//! propagates it for one one-way delay; arrivals while busy wait in a
//! drop-tail FIFO. The module stays engine-agnostic: `submit` and
//! `on_tx_done` return schedules, and whoever owns the event queue turns
//! them into events.

use bytes::Bytes;
use thiserror::Error;

use crate::sim::{EventQueue, SimTime};
use crate::wire::Segment;
use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct LinkConfig {
    pub name: String,
    /// Serialization rate, bits per second.
    pub rate_bps: u64,
    pub one_way_delay: SimTime,
    /// Waiting-room size in packets; the packet in service does not count.
    pub queue_capacity: usize,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.rate_bps == 0 {
            return Err(TopologyError::ZeroRate { link: self.name.clone() });
        }
        if self.queue_capacity == 0 {
            return Err(TopologyError::ZeroQueue { link: self.name.clone() });
        }
        Ok(())
    }
}

#[derive(Error, Debug)]
pub enum TopologyError {
    #[error("link {link}: rate must be positive")]
    ZeroRate { link: String },
    #[error("link {link}: queue capacity must be at least 1")]
    ZeroQueue { link: String },
    #[error(
        "delay budget impossible: base RTT {rtt} leaves no room after \
         4 access crossings of {access_delay} each"
    )]
    DelayBudget { rtt: SimTime, access_delay: SimTime },
}

/// One packet on the wire: the encoded frame plus accounting metadata.
/// Measurement probes travel as empty frames with zero wire size.
#[derive(Clone, Debug)]
pub struct Packet {
    pub payload: Bytes,
    pub size_on_wire: u64,
    pub ingress_time: SimTime,
}

impl Packet {
    pub fn from_segment(seg: &Segment, now: SimTime) -> Packet {
        let frame = crate::wire::encode_segment(seg);
        Packet { size_on_wire: frame.len() as u64, payload: Bytes::from(frame), ingress_time: now }
    }

    /// Zero-size probe: pure propagation, used to measure base RTT.
    pub fn probe(now: SimTime) -> Packet {
        Packet { payload: Bytes::new(), size_on_wire: 0, ingress_time: now }
    }

    pub fn is_probe(&self) -> bool {
        self.payload.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxSchedule {
    /// When serialization finishes and the link is free again.
    pub done_at: SimTime,
}

#[derive(Debug)]
pub enum SubmitOutcome {
    /// Link was idle; serialization starts now.
    Started(TxSchedule),
    /// Link busy; packet waits its FIFO turn.
    Queued,
    /// Waiting room full; packet discarded.
    Dropped,
}

/// Completion of one serialization: the packet now propagates, and the
/// next waiter (if any) starts.
#[derive(Debug)]
pub struct TxDone {
    pub delivered: Packet,
    /// Arrival time at the far end of the link.
    pub deliver_at: SimTime,
    pub next: Option<TxSchedule>,
}

#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct LinkCounters {
    pub submitted: u64,
    pub forwarded: u64,
    pub dropped: u64,
    pub bytes_forwarded: u64,
}

pub struct Link {
    cfg: LinkConfig,
    in_service: Option<Packet>,
    queue: VecDeque<Packet>,
    counters: LinkCounters,
    peak_queue: usize,
}

impl Link {
    pub fn new(cfg: LinkConfig) -> Link {
        cfg.validate().expect("invalid link config");
        Link { cfg, in_service: None, queue: VecDeque::new(), counters: LinkCounters::default(), peak_queue: 0 }
    }

    pub fn name(&self) -> &str {
        &self.cfg.name
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn counters(&self) -> LinkCounters {
        self.counters
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn peak_queue(&self) -> usize {
        self.peak_queue
    }

    pub fn is_idle(&self) -> bool {
        self.in_service.is_none() && self.queue.is_empty()
    }

    pub fn serialization_time(&self, bytes: u64) -> SimTime {
        SimTime::from_nanos((bytes as u128 * 8_000_000_000 / self.cfg.rate_bps as u128) as u64)
    }

    pub fn submit(&mut self, packet: Packet, now: SimTime) -> SubmitOutcome {
        self.counters.submitted += 1;
        if self.in_service.is_some() {
            if self.queue.len() >= self.cfg.queue_capacity {
                self.counters.dropped += 1;
                return SubmitOutcome::Dropped;
            }
            self.queue.push_back(packet);
            self.peak_queue = self.peak_queue.max(self.queue.len());
            return SubmitOutcome::Queued;
        }
        let done_at = now + self.serialization_time(packet.size_on_wire);
        self.in_service = Some(packet);
        SubmitOutcome::Started(TxSchedule { done_at })
    }

    /// Serialization finished: release the packet to propagation and pull
    /// the next one from the queue.
    pub fn on_tx_done(&mut self, now: SimTime) -> TxDone {
        let delivered = self.in_service.take().expect("tx_done on an idle link");
        self.counters.forwarded += 1;
        self.counters.bytes_forwarded += delivered.size_on_wire;
        let next = self.queue.pop_front().map(|p| {
            let sched = TxSchedule { done_at: now + self.serialization_time(p.size_on_wire) };
            self.in_service = Some(p);
            sched
        });
        TxDone { delivered, deliver_at: now + self.cfg.one_way_delay, next }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LinkId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Sender,
    Receiver,
}

/// Two three-link chains: sender -> r1 -> r2 -> receiver and back.
pub struct Topology {
    links: Vec<Link>,
    forward: [LinkId; 3],
    reverse: [LinkId; 3],
}

impl Topology {
    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn link_mut(&mut self, id: LinkId) -> &mut Link {
        &mut self.links[id.0]
    }

    pub fn links(&self) -> impl Iterator<Item = (LinkId, &Link)> {
        self.links.iter().enumerate().map(|(i, l)| (LinkId(i), l))
    }

    pub fn forward_path(&self) -> [LinkId; 3] {
        self.forward
    }

    pub fn reverse_path(&self) -> [LinkId; 3] {
        self.reverse
    }

    /// Forward-direction bottleneck (r1 -> r2).
    pub fn bottleneck(&self) -> LinkId {
        self.forward[1]
    }

    pub fn first_hop(&self, from: Endpoint) -> LinkId {
        match from {
            Endpoint::Sender => self.forward[0],
            Endpoint::Receiver => self.reverse[0],
        }
    }

    /// Next link after `id`, or the endpoint the path ends at.
    pub fn next_hop(&self, id: LinkId) -> Result<LinkId, Endpoint> {
        for (path, end) in [(self.forward, Endpoint::Receiver), (self.reverse, Endpoint::Sender)] {
            if let Some(pos) = path.iter().position(|&l| l == id) {
                return path.get(pos + 1).copied().ok_or(end);
            }
        }
        unreachable!("link {id:?} on no path")
    }
}

#[derive(Clone, Debug)]
pub struct DumbbellConfig {
    pub access: LinkConfig,
    pub bottleneck: LinkConfig,
}

impl DumbbellConfig {
    /// Split a base-RTT budget across the path: four access crossings at
    /// `access_delay`, the rest assigned to the bottleneck symmetrically.
    pub fn from_budget(
        bottleneck_rate_bps: u64,
        base_rtt: SimTime,
        access_rate_bps: u64,
        access_delay: SimTime,
        bottleneck_queue: usize,
    ) -> Result<DumbbellConfig, TopologyError> {
        let access_total = access_delay * 4;
        let remaining = base_rtt
            .checked_sub(access_total)
            .ok_or(TopologyError::DelayBudget { rtt: base_rtt, access_delay })?;
        let cfg = DumbbellConfig {
            access: LinkConfig {
                name: "access".into(),
                rate_bps: access_rate_bps,
                one_way_delay: access_delay,
                queue_capacity: DEFAULT_QUEUE_CAPACITY,
            },
            bottleneck: LinkConfig {
                name: "bottleneck".into(),
                rate_bps: bottleneck_rate_bps,
                one_way_delay: remaining / 2,
                queue_capacity: bottleneck_queue,
            },
        };
        cfg.access.validate()?;
        cfg.bottleneck.validate()?;
        Ok(cfg)
    }

    /// Sum of one-way delays out and back.
    pub fn base_rtt(&self) -> SimTime {
        (self.access.one_way_delay * 2 + self.bottleneck.one_way_delay) * 2
    }
}

pub const DEFAULT_QUEUE_CAPACITY: usize = 100;

pub fn build_dumbbell(cfg: &DumbbellConfig) -> Result<Topology, TopologyError> {
    cfg.access.validate()?;
    cfg.bottleneck.validate()?;
    let mk = |name: &str, base: &LinkConfig| {
        Link::new(LinkConfig { name: name.to_string(), ..base.clone() })
    };
    let links = vec![
        mk("snd-r1", &cfg.access),
        mk("r1-r2", &cfg.bottleneck),
        mk("r2-rcv", &cfg.access),
        mk("rcv-r2", &cfg.access),
        mk("r2-r1", &cfg.bottleneck),
        mk("r1-snd", &cfg.access),
    ];
    Ok(Topology {
        links,
        forward: [LinkId(0), LinkId(1), LinkId(2)],
        reverse: [LinkId(3), LinkId(4), LinkId(5)],
    })
}

/// Round-trip time seen by a zero-size probe pair: pure propagation, no
/// serialization or queueing. Runs a self-contained event loop over the
/// topology and returns the first probe's RTT.
pub fn measure_base_rtt(topo: &mut Topology) -> SimTime {
    enum Ev {
        TxDone(LinkId),
        Deliver(LinkId, Packet),
    }
    let mut q: EventQueue<Ev> = EventQueue::new();
    let mut arrival: Option<SimTime> = None;
    let first = topo.first_hop(Endpoint::Sender);
    for _ in 0..2 {
        match topo.link_mut(first).submit(Packet::probe(SimTime::ZERO), SimTime::ZERO) {
            SubmitOutcome::Started(s) => {
                q.schedule_at(s.done_at, Ev::TxDone(first));
            }
            SubmitOutcome::Queued | SubmitOutcome::Dropped => {}
        }
    }
    q.run_until(SimTime::from_secs(3600), |q, now, ev| match ev {
        Ev::TxDone(id) => {
            let done = topo.link_mut(id).on_tx_done(now);
            q.schedule_at(done.deliver_at, Ev::Deliver(id, done.delivered));
            if let Some(next) = done.next {
                q.schedule_at(next.done_at, Ev::TxDone(id));
            }
        }
        Ev::Deliver(id, pkt) => match topo.next_hop(id) {
            Ok(next) => match topo.link_mut(next).submit(pkt, now) {
                SubmitOutcome::Started(s) => {
                    q.schedule_at(s.done_at, Ev::TxDone(next));
                }
                SubmitOutcome::Queued | SubmitOutcome::Dropped => {}
            },
            Err(Endpoint::Receiver) => {
                // Echo straight back along the reverse path.
                let back = topo.first_hop(Endpoint::Receiver);
                match topo.link_mut(back).submit(pkt, now) {
                    SubmitOutcome::Started(s) => {
                        q.schedule_at(s.done_at, Ev::TxDone(back));
                    }
                    SubmitOutcome::Queued | SubmitOutcome::Dropped => {}
                }
            }
            Err(Endpoint::Sender) => {
                arrival.get_or_insert(now);
            }
        },
    });
    arrival.expect("probe returned")
}
