//! Discrete-event core: integer-nanosecond clock and a time-ordered event queue.
//!
//! Everything else in the crate is driven from this queue. Determinism is the
//! contract: two events scheduled for the same instant dispatch in the order
//! they were scheduled, tracked with a monotone sequence number, so a run never
//! depends on hash ordering or platform time.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

/// Simulation timestamp (and duration) in integer nanoseconds.
///
/// All time arithmetic in the crate is integer arithmetic on this type;
/// floating point only appears at the reporting boundary.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    /// Millisecond value rounded to the nearest nanosecond.
    pub fn from_millis_f64(ms: f64) -> Self {
        assert!(ms.is_finite() && ms >= 0.0, "time out of range: {ms} ms");
        SimTime((ms * 1e6).round() as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    pub fn checked_sub(self, other: SimTime) -> Option<SimTime> {
        self.0.checked_sub(other.0).map(SimTime)
    }

    pub fn min(self, other: SimTime) -> SimTime {
        SimTime(self.0.min(other.0))
    }

    pub fn max(self, other: SimTime) -> SimTime {
        SimTime(self.0.max(other.0))
    }

}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        assert!(self.0 >= rhs.0, "SimTime underflow: {} - {}", self.0, rhs.0);
        SimTime(self.0 - rhs.0)
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, k: u64) -> SimTime {
        SimTime(self.0 * k)
    }
}

impl Div<u64> for SimTime {
    type Output = SimTime;
    fn div(self, k: u64) -> SimTime {
        SimTime(self.0 / k)
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Handle for a scheduled event, usable to cancel it before it fires.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct EventHandle(u64);

struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Time-ordered event queue with stable same-instant ordering.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    now: SimTime,
    next_seq: u64,
    // Lazy deletion: cancelled seqs are skipped when popped.
    cancelled: HashSet<u64>,
    pending: HashSet<u64>,
    dispatched: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            cancelled: HashSet::new(),
            pending: HashSet::new(),
            dispatched: 0,
        }
    }

    /// Current simulation time: the timestamp of the most recently popped
    /// event (or the deadline `run_until` last advanced to).
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Schedule `event` at absolute time `at`.
    ///
    /// Scheduling in the past is a configuration error and panics.
    pub fn schedule_at(&mut self, at: SimTime, event: E) -> EventHandle {
        assert!(
            at >= self.now,
            "event scheduled in the past: at={at:?} now={:?}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(seq);
        self.heap.push(Reverse(Entry { at, seq, event }));
        EventHandle(seq)
    }

    pub fn schedule_after(&mut self, delay: SimTime, event: E) -> EventHandle {
        self.schedule_at(self.now + delay, event)
    }

    /// Cancel a pending event. Returns false if it already fired or was
    /// already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.pending.remove(&handle.0) {
            self.cancelled.insert(handle.0);
            true
        } else {
            false
        }
    }

    /// Pop the next event with `fire_at <= deadline`, advancing the clock to
    /// its timestamp. Returns None (clock unchanged) when nothing is due.
    pub fn pop_due(&mut self, deadline: SimTime) -> Option<(SimTime, E)> {
        while let Some(Reverse(head)) = self.heap.peek() {
            if head.at > deadline {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked entry");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            self.pending.remove(&entry.seq);
            debug_assert!(entry.at >= self.now);
            self.now = entry.at;
            self.dispatched += 1;
            return Some((entry.at, entry.event));
        }
        None
    }

    /// Dispatch every event with `fire_at <= deadline` through `handler`,
    /// then advance the clock to `deadline`.
    ///
    /// Returns the timestamp of the last dispatched event, or `deadline` when
    /// nothing was due. The handler may schedule further events; ones that
    /// land inside the window are dispatched in the same call.
    pub fn run_until<F>(&mut self, deadline: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        let mut last = None;
        while let Some((at, event)) = self.pop_due(deadline) {
            last = Some(at);
            handler(self, at, event);
        }
        self.now = deadline.max(self.now);
        last.unwrap_or(deadline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_instant_preserves_schedule_order() {
        let mut q = EventQueue::new();
        q.schedule_at(SimTime::ZERO, "a");
        q.schedule_at(SimTime::ZERO, "b");
        let mut seen = Vec::new();
        q.run_until(SimTime::from_millis(1), |_, _, e| seen.push(e));
        assert_eq!(seen, ["a", "b"]);
    }

    #[test]
    fn run_until_empty_queue_returns_deadline() {
        let mut q: EventQueue<()> = EventQueue::new();
        let t = q.run_until(SimTime::from_secs(1), |_, _, _| {});
        assert_eq!(t, SimTime::from_secs(1));
        assert_eq!(q.now(), SimTime::from_secs(1));
    }

    #[test]
    fn run_until_returns_last_dispatch_time() {
        let mut q = EventQueue::new();
        q.schedule_at(SimTime::from_millis(10), ());
        let t = q.run_until(SimTime::from_secs(1), |_, _, _| {});
        assert_eq!(t, SimTime::from_millis(10));
    }

    #[test]
    fn cancelled_event_never_fires_and_cancel_reports_status() {
        let mut q = EventQueue::new();
        let h = q.schedule_at(SimTime::from_millis(5), "x");
        assert!(q.cancel(h));
        assert!(!q.cancel(h));
        let mut fired = 0;
        q.run_until(SimTime::from_secs(1), |_, _, _| fired += 1);
        assert_eq!(fired, 0);

        let h2 = q.schedule_at(SimTime::from_secs(2), "y");
        q.run_until(SimTime::from_secs(3), |_, _, _| {});
        assert!(!q.cancel(h2), "cancel after firing must report false");
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_the_past_is_fatal() {
        let mut q = EventQueue::new();
        q.schedule_at(SimTime::from_millis(10), ());
        q.run_until(SimTime::from_millis(20), |_, _, _| {});
        q.schedule_at(SimTime::from_millis(15), ());
    }

    #[test]
    fn random_events_dispatch_in_stable_sorted_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut q = EventQueue::new();
        let mut expected: Vec<(u64, usize)> = Vec::new();
        for i in 0..1000 {
            let at = rng.gen_range(0..500u64);
            q.schedule_at(SimTime::from_micros(at), i);
            expected.push((at * 1000, i));
        }
        // Oracle: stable sort by (fire_at, schedule order).
        expected.sort_by_key(|&(at, _)| at);
        let mut seen = Vec::new();
        q.run_until(SimTime::from_secs(1), |_, at, i| seen.push((at.as_nanos(), i)));
        assert_eq!(seen, expected);
    }

    #[test]
    fn handler_can_schedule_within_window() {
        let mut q = EventQueue::new();
        q.schedule_at(SimTime::from_millis(1), 1u32);
        let mut seen = Vec::new();
        q.run_until(SimTime::from_millis(10), |q, now, v| {
            seen.push(v);
            if v < 3 {
                q.schedule_at(now + SimTime::from_millis(1), v + 1);
            }
        });
        assert_eq!(seen, [1, 2, 3]);
    }
}
