//! The Conductor: an interceptor/feeder sitting between the application and
//! the transport send buffer.
//!
//! Application writes are intercepted into five priority queues (P0 highest).
//! Whenever the transport signals room, the Conductor hands it exactly one
//! MSS-sized slice of the highest-priority *eligible* queue, so a late
//! high-priority write overtakes everything still queued below it while the
//! transport itself stays a plain reliable byte pipe. Sharing between levels
//! is governed by the hysteresis debt ledger; overload is handled by shedding
//! whole application chunks, lowest priority first.

mod ledger;

pub use ledger::{
    DebtLedger, FairnessConfig, FairnessConfigError, QueueFairness, QueueState,
};

use std::collections::VecDeque;
use std::fmt;

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;

/// Number of priority levels.
pub const LEVELS: usize = 5;

/// Priority level, P0 (highest) through P4 (lowest).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Priority(u8);

#[derive(Error, Debug, PartialEq, Eq)]
#[error("priority level {0} out of range (levels run 0..={max})", max = LEVELS - 1)]
pub struct PriorityError(pub u8);

impl Priority {
    pub const P0: Priority = Priority(0);
    pub const P1: Priority = Priority(1);
    pub const P2: Priority = Priority(2);
    pub const P3: Priority = Priority(3);
    pub const P4: Priority = Priority(4);

    pub fn new(level: u8) -> Result<Priority, PriorityError> {
        if (level as usize) < LEVELS {
            Ok(Priority(level))
        } else {
            Err(PriorityError(level))
        }
    }

    pub fn all() -> impl Iterator<Item = Priority> {
        (0..LEVELS as u8).map(Priority)
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// One intercepted application message.
#[derive(Clone, Debug)]
pub struct Chunk {
    pub payload: Bytes,
    pub priority: Priority,
    pub enqueued_at: SimTime,
    /// Arrival order within this priority level.
    pub seq: u64,
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum InterceptError {
    #[error("empty payload")]
    Empty,
}

/// Slice picked by [`Conductor::select_next`]; nothing is dequeued until the
/// matching [`Conductor::commit_send`].
#[derive(Clone, Debug)]
pub struct Selection {
    pub queue: Priority,
    pub payload: Bytes,
}

/// One whole chunk discarded by a shed operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShedChunk {
    pub priority: Priority,
    pub bytes: u64,
}

#[derive(Default)]
struct PrioQueue {
    chunks: VecDeque<Chunk>,
    bytes: u64,
    next_seq: u64,
}

/// Byte counters kept per priority level.
#[derive(Clone, Copy, Default, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConductorCounters {
    pub intercepted: [u64; LEVELS],
    pub committed: [u64; LEVELS],
    pub shed: [u64; LEVELS],
    pub deadlock_resolutions: u64,
}

pub struct Conductor {
    queues: [PrioQueue; LEVELS],
    ledger: DebtLedger,
    counters: ConductorCounters,
}

impl Conductor {
    pub fn new(cfg: FairnessConfig) -> Result<Conductor, FairnessConfigError> {
        cfg.validate()?;
        Ok(Conductor {
            queues: Default::default(),
            ledger: DebtLedger::new(cfg),
            counters: ConductorCounters::default(),
        })
    }

    /// Queue an application message at `priority`.
    pub fn intercept(
        &mut self,
        payload: Bytes,
        priority: Priority,
        now: SimTime,
    ) -> Result<(), InterceptError> {
        if payload.is_empty() {
            return Err(InterceptError::Empty);
        }
        let q = &mut self.queues[priority.index()];
        let seq = q.next_seq;
        q.next_seq += 1;
        q.bytes += payload.len() as u64;
        self.counters.intercepted[priority.index()] += payload.len() as u64;
        q.chunks.push_back(Chunk { payload, priority, enqueued_at: now, seq });
        Ok(())
    }

    /// Pick the next slice to feed: up to `mss` bytes from the front chunk of
    /// the highest-priority eligible non-empty queue. A slice never spans two
    /// chunks.
    ///
    /// When every non-empty queue is in debt this resolves the deadlock first
    /// (mutating the ledger) and then reselects - which is why selection takes
    /// `&mut self`. Returns None only when all queues are empty.
    pub fn select_next(&mut self, mss: usize) -> Option<Selection> {
        assert!(mss > 0, "mss must be positive");
        if let Some(sel) = self.pick(mss) {
            return Some(sel);
        }
        let members: Vec<Priority> = Priority::all()
            .filter(|p| !self.queues[p.index()].chunks.is_empty())
            .collect();
        if members.is_empty() {
            return None;
        }
        self.ledger.resolve_deadlock(&members);
        self.counters.deadlock_resolutions += 1;
        let sel = self.pick(mss);
        debug_assert!(sel.is_some(), "deadlock resolution must free a queue");
        sel
    }

    fn pick(&self, mss: usize) -> Option<Selection> {
        for p in Priority::all() {
            let q = &self.queues[p.index()];
            if q.chunks.is_empty() || self.ledger.state(p) != QueueState::Eligible {
                continue;
            }
            let front = &q.chunks[0];
            let n = front.payload.len().min(mss);
            return Some(Selection { queue: p, payload: front.payload.slice(..n) });
        }
        None
    }

    /// Commit a send of `n` bytes from `queue`: dequeue the bytes and apply
    /// the debt update. `n` must not exceed the front chunk's remaining bytes.
    pub fn commit_send(&mut self, queue: Priority, n: usize) {
        let q = &mut self.queues[queue.index()];
        let front = q.chunks.front_mut().expect("commit_send on empty queue");
        assert!(
            n > 0 && n <= front.payload.len(),
            "commit_send of {n} bytes but front chunk holds {}",
            front.payload.len()
        );
        let _ = front.payload.split_to(n);
        if front.payload.is_empty() {
            q.chunks.pop_front();
        }
        q.bytes -= n as u64;
        self.counters.committed[queue.index()] += n as u64;
        self.ledger.on_commit(queue, n as u64);
    }

    /// Save-Data mode: discard everything queued below `threshold` (i.e. at a
    /// numerically larger level). Returns the discarded chunks, oldest first
    /// per level.
    pub fn shed_below(&mut self, threshold: Priority) -> Vec<ShedChunk> {
        let mut shed = Vec::new();
        for p in Priority::all().filter(|p| p.level() > threshold.level()) {
            let q = &mut self.queues[p.index()];
            self.counters.shed[p.index()] += q.bytes;
            for chunk in q.chunks.drain(..) {
                shed.push(ShedChunk { priority: p, bytes: chunk.payload.len() as u64 });
            }
            q.bytes = 0;
        }
        shed
    }

    /// Congestion response: discard whole chunks, oldest-first from the
    /// lowest-priority non-empty queue upward, until at least `bytes_needed`
    /// are gone or only P0 data remains. P0 is never shed.
    pub fn shed_on_congestion(&mut self, bytes_needed: u64) -> Vec<ShedChunk> {
        let mut shed = Vec::new();
        let mut total = 0;
        for i in (1..LEVELS).rev() {
            let q = &mut self.queues[i];
            while total < bytes_needed {
                match q.chunks.pop_front() {
                    Some(chunk) => {
                        let n = chunk.payload.len() as u64;
                        q.bytes -= n;
                        self.counters.shed[i] += n;
                        total += n;
                        shed.push(ShedChunk { priority: Priority::new(i as u8).unwrap(), bytes: n });
                    }
                    None => break,
                }
            }
            if total >= bytes_needed {
                break;
            }
        }
        shed
    }

    pub fn queued_bytes(&self, p: Priority) -> u64 {
        self.queues[p.index()].bytes
    }

    pub fn total_queued(&self) -> u64 {
        self.queues.iter().map(|q| q.bytes).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(|q| q.chunks.is_empty())
    }

    pub fn ledger(&self) -> &DebtLedger {
        &self.ledger
    }

    pub fn counters(&self) -> &ConductorCounters {
        &self.counters
    }
}
