//! Receive side: in-order reassembly with an out-of-order hold queue,
//! ACKing every segment it sees.

use std::collections::BTreeMap;

use bytes::Bytes;

use crate::conductor::LEVELS;
use crate::wire::{Segment, SegmentFlags};

#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct ReceiverCounters {
    pub segments_received: u64,
    pub duplicates: u64,
    pub out_of_order: u64,
}

#[derive(Default)]
pub struct Receiver {
    established: bool,
    rcv_nxt: u32,
    held: BTreeMap<u32, Bytes>,
    stream: Vec<u8>,
    option_counts: [u64; LEVELS],
    counters: ReceiverCounters,
}

impl Receiver {
    pub fn new() -> Receiver {
        Receiver::default()
    }

    /// Bytes delivered in order so far.
    pub fn stream_len(&self) -> u64 {
        self.stream.len() as u64
    }

    pub fn stream(&self) -> &[u8] {
        &self.stream
    }

    /// Tagged segments observed on the wire, per priority level.
    pub fn option_counts(&self) -> [u64; LEVELS] {
        self.option_counts
    }

    pub fn counters(&self) -> ReceiverCounters {
        self.counters
    }

    /// Process one arriving segment; the returned segment, if any, is the
    /// reply to send back.
    pub fn on_segment(&mut self, seg: &Segment) -> Option<Segment> {
        if seg.header.flags.syn {
            self.established = true;
            return Some(Segment::control(SegmentFlags::SYN_ACK, 0));
        }
        if seg.payload.is_empty() {
            return None; // bare ACKs carry nothing for this side
        }
        self.counters.segments_received += 1;
        if let Some(p) = seg.header.priority {
            self.option_counts[p.index()] += 1;
        }
        let seq = seg.header.seq;
        let end = seq.wrapping_add(seg.payload.len() as u32);
        if end <= self.rcv_nxt {
            self.counters.duplicates += 1;
        } else if seq > self.rcv_nxt {
            self.counters.out_of_order += 1;
            self.held.insert(seq, seg.payload.clone());
        } else {
            let skip = (self.rcv_nxt - seq) as usize;
            self.stream.extend_from_slice(&seg.payload[skip..]);
            self.rcv_nxt = end;
            self.drain_held();
        }
        Some(Segment::control(SegmentFlags::ACK, self.rcv_nxt))
    }

    fn drain_held(&mut self) {
        while let Some((&seq, payload)) = self.held.first_key_value() {
            if seq > self.rcv_nxt {
                break;
            }
            let end = seq.wrapping_add(payload.len() as u32);
            if end > self.rcv_nxt {
                let skip = (self.rcv_nxt - seq) as usize;
                self.stream.extend_from_slice(&payload[skip..]);
                self.rcv_nxt = end;
            }
            self.held.pop_first();
        }
    }
}
