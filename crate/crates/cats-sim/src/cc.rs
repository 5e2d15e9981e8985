//! Model-based congestion control: windowed bottleneck-bandwidth and
//! round-trip-propagation estimators driving a paced sender.
//!
//! The controller keeps two measurements - btl_bw, a windowed max of
//! delivery-rate samples, and rt_prop, a windowed min of RTT samples - and
//! walks the usual four phases: Startup (gain 2/ln2) until bandwidth growth
//! plateaus, Drain back down to one BDP in flight, ProbeBW cycling gains
//! around 1.0, and a periodic ProbeRTT that floors the window to re-measure
//! propagation delay. Loss is not a control signal here; recovery is the
//! transport's business.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;

/// Startup/Drain gain pair: 2/ln 2 fills the pipe in O(log BDP) rounds.
pub const STARTUP_GAIN: f64 = 2.885390081777927;
pub const DRAIN_GAIN: f64 = 1.0 / STARTUP_GAIN;
/// ProbeBW pacing-gain cycle, one step per rt_prop.
pub const PROBE_BW_GAINS: [f64; 8] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
const PROBE_BW_CWND_GAIN: f64 = 2.0;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Startup,
    Drain,
    ProbeBw,
    ProbeRtt,
}

#[derive(Clone, Debug)]
pub struct BbrConfig {
    pub mss: u32,
    /// Initial window, in segments, before any measurement exists.
    pub initial_window_segments: u32,
    /// RTT assumed for pacing until the first sample arrives.
    pub initial_rtt_guess: SimTime,
    /// btl_bw filter window, in packet-timed rounds.
    pub bw_window_rounds: u64,
    /// rt_prop filter window (wall clock).
    pub rtprop_window: SimTime,
    /// How long the window stays floored during ProbeRTT.
    pub probe_rtt_duration: SimTime,
    /// Startup exits when btl_bw grows less than this factor...
    pub startup_growth: f64,
    /// ...for this many consecutive rounds.
    pub startup_plateau_rounds: u32,
    pub min_cwnd_segments: u32,
}

impl Default for BbrConfig {
    fn default() -> Self {
        BbrConfig {
            mss: 1448,
            initial_window_segments: 10,
            initial_rtt_guess: SimTime::from_millis(100),
            bw_window_rounds: 10,
            rtprop_window: SimTime::from_secs(10),
            probe_rtt_duration: SimTime::from_millis(200),
            startup_growth: 1.25,
            startup_plateau_rounds: 3,
            min_cwnd_segments: 4,
        }
    }
}

/// One delivery-rate sample, produced by the transport per cumulative ACK.
#[derive(Clone, Copy, Debug)]
pub struct DeliverySample {
    /// Bytes delivered between the sampled packet's send and its ACK.
    pub delivered_bytes: u64,
    /// Connection's delivered counter when the sampled packet was sent.
    pub delivered_at_send: u64,
    /// max(send-phase elapsed, ack-phase elapsed) for the sample interval.
    pub interval: SimTime,
    /// RTT of the sampled packet; None when retransmission makes it ambiguous.
    pub rtt: Option<SimTime>,
    /// Sample taken while the sender had no data to send; such samples
    /// cannot raise btl_bw.
    pub app_limited: bool,
}

/// Windowed max filter over packet-timed rounds (monotone deque).
#[derive(Clone, Debug, Default)]
struct MaxBwFilter {
    entries: VecDeque<(u64, u64)>, // (expiry round, bps)
}

impl MaxBwFilter {
    fn current(&self) -> Option<u64> {
        self.entries.front().map(|&(_, v)| v)
    }

    fn update(&mut self, round: u64, window: u64, bps: u64, app_limited: bool) {
        while self.entries.front().is_some_and(|&(exp, _)| exp <= round) {
            self.entries.pop_front();
        }
        // An app-limited sample underestimates the path and never raises
        // the filter; time still advances the window above.
        if app_limited {
            return;
        }
        while self.entries.back().is_some_and(|&(_, v)| v <= bps) {
            self.entries.pop_back();
        }
        self.entries.push_back((round + window, bps));
    }
}

/// Pacing and window budget for the next transmission.
#[derive(Clone, Copy, Debug)]
pub struct SendBudget {
    /// Window check: in_flight + MSS fits under cwnd.
    pub allowed: bool,
    /// Earliest instant pacing permits the next segment.
    pub earliest: SimTime,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CcSnapshot {
    pub btl_bw_bps: u64,
    pub rt_prop_ms: f64,
    pub phase: Phase,
    pub pacing_gain: f64,
    pub pacing_rate_bps: u64,
    pub cwnd_bytes: u64,
}

pub struct Bbr {
    cfg: BbrConfig,
    filter: MaxBwFilter,
    rt_prop: Option<SimTime>,
    rt_prop_stamp: SimTime,
    phase: Phase,
    pacing_rate: u64,
    // Packet-timed round tracking.
    round: u64,
    next_round_delivered: u64,
    // Startup plateau detection.
    full_bw: u64,
    plateau_rounds: u32,
    filled_pipe: bool,
    // ProbeBW cycle position.
    cycle_index: usize,
    cycle_stamp: SimTime,
    // ProbeRTT bookkeeping.
    probe_rtt_done_at: Option<SimTime>,
}

impl Bbr {
    pub fn new(cfg: BbrConfig) -> Bbr {
        let nominal = Self::nominal_bw(&cfg);
        Bbr {
            cfg,
            filter: MaxBwFilter::default(),
            rt_prop: None,
            rt_prop_stamp: SimTime::ZERO,
            phase: Phase::Startup,
            pacing_rate: (STARTUP_GAIN * nominal as f64) as u64,
            round: 0,
            next_round_delivered: 0,
            full_bw: 0,
            plateau_rounds: 0,
            filled_pipe: false,
            cycle_index: 0,
            cycle_stamp: SimTime::ZERO,
            probe_rtt_done_at: None,
        }
    }

    /// Pre-measurement bandwidth: one initial window per guessed RTT.
    fn nominal_bw(cfg: &BbrConfig) -> u64 {
        let iw_bytes = cfg.mss as u64 * cfg.initial_window_segments as u64;
        iw_bytes * 8_000_000_000 / cfg.initial_rtt_guess.as_nanos()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn btl_bw_bps(&self) -> u64 {
        self.filter.current().unwrap_or_else(|| Self::nominal_bw(&self.cfg))
    }

    pub fn rt_prop(&self) -> Option<SimTime> {
        self.rt_prop
    }

    pub fn pacing_rate_bps(&self) -> u64 {
        self.pacing_rate.max(1)
    }

    pub fn pacing_gain(&self) -> f64 {
        match self.phase {
            Phase::Startup => STARTUP_GAIN,
            Phase::Drain => DRAIN_GAIN,
            Phase::ProbeBw => PROBE_BW_GAINS[self.cycle_index],
            Phase::ProbeRtt => 1.0,
        }
    }

    fn min_cwnd(&self) -> u64 {
        self.cfg.min_cwnd_segments as u64 * self.cfg.mss as u64
    }

    fn initial_window(&self) -> u64 {
        self.cfg.initial_window_segments as u64 * self.cfg.mss as u64
    }

    /// Estimated bandwidth-delay product in bytes, None before measurements.
    pub fn bdp_bytes(&self) -> Option<u64> {
        let bw = self.filter.current()?;
        let rt = self.rt_prop?;
        Some((bw as u128 * rt.as_nanos() as u128 / 8_000_000_000) as u64)
    }

    /// Congestion window in bytes: gain x BDP floored at the minimum window
    /// (and at the initial window until the pipe has been filled once).
    pub fn cwnd_bytes(&self) -> u64 {
        if self.phase == Phase::ProbeRtt {
            return self.min_cwnd();
        }
        let gain = match self.phase {
            Phase::Startup | Phase::Drain => STARTUP_GAIN,
            _ => PROBE_BW_CWND_GAIN,
        };
        let target = match self.bdp_bytes() {
            Some(bdp) => (gain * bdp as f64) as u64,
            None => self.initial_window(),
        };
        let floor = if self.filled_pipe { self.min_cwnd() } else { self.initial_window() };
        target.max(floor).max(self.min_cwnd())
    }

    /// Gap pacing imposes between back-to-back MSS-sized sends.
    pub fn pacing_interval(&self) -> SimTime {
        let bits = self.cfg.mss as u64 * 8;
        SimTime::from_nanos(bits * 1_000_000_000 / self.pacing_rate_bps())
    }

    /// Budget for the next send attempt given current in-flight bytes.
    pub fn send_budget(&self, in_flight: u64, last_tx: Option<SimTime>) -> SendBudget {
        SendBudget {
            allowed: in_flight + self.cfg.mss as u64 <= self.cwnd_bytes(),
            earliest: match last_tx {
                Some(t) => t + self.pacing_interval(),
                None => SimTime::ZERO,
            },
        }
    }

    /// Feed an RTT-only sample (e.g. from connection setup) into rt_prop.
    pub fn note_rtt(&mut self, rtt: SimTime, now: SimTime) {
        let expired = now.saturating_sub(self.rt_prop_stamp) > self.cfg.rtprop_window;
        if expired || self.rt_prop.is_none_or(|cur| rtt <= cur) {
            self.rt_prop = Some(rtt);
            self.rt_prop_stamp = now;
        }
    }

    /// Main update: consume one delivery-rate sample at ACK time.
    pub fn on_delivery(&mut self, sample: &DeliverySample, in_flight: u64, now: SimTime) {
        // Packet-timed round accounting: a round ends when a packet sent
        // after the previous round's close is delivered.
        let round_start = sample.delivered_at_send >= self.next_round_delivered;
        if round_start {
            self.round += 1;
            self.next_round_delivered = sample.delivered_at_send + sample.delivered_bytes;
        }

        if sample.interval > SimTime::ZERO && sample.delivered_bytes > 0 {
            let bps = (sample.delivered_bytes as u128 * 8_000_000_000
                / sample.interval.as_nanos() as u128) as u64;
            self.filter.update(self.round, self.cfg.bw_window_rounds, bps, sample.app_limited);
        }
        // Expiry must be judged before this sample refreshes the stamp,
        // or ProbeRTT could never trigger.
        let rt_expired = self.rt_prop.is_some()
            && now.saturating_sub(self.rt_prop_stamp) > self.cfg.rtprop_window;
        if let Some(rtt) = sample.rtt {
            self.note_rtt(rtt, now);
        }

        if round_start && !self.filled_pipe && !sample.app_limited {
            self.check_startup_plateau();
        }

        match self.phase {
            Phase::Startup => {
                if self.filled_pipe {
                    self.phase = Phase::Drain;
                }
            }
            Phase::Drain => {
                if self.bdp_bytes().is_some_and(|bdp| in_flight <= bdp) {
                    self.enter_probe_bw(now);
                }
            }
            Phase::ProbeBw => {
                if let Some(rt) = self.rt_prop {
                    if now.saturating_sub(self.cycle_stamp) >= rt {
                        self.cycle_index = (self.cycle_index + 1) % PROBE_BW_GAINS.len();
                        self.cycle_stamp = now;
                    }
                }
            }
            Phase::ProbeRtt => {}
        }

        self.update_probe_rtt(rt_expired, in_flight, now);
        self.update_pacing_rate();
    }

    fn check_startup_plateau(&mut self) {
        let Some(bw) = self.filter.current() else { return };
        if bw as f64 >= self.full_bw as f64 * self.cfg.startup_growth {
            self.full_bw = bw;
            self.plateau_rounds = 0;
        } else {
            self.plateau_rounds += 1;
            if self.plateau_rounds >= self.cfg.startup_plateau_rounds {
                self.filled_pipe = true;
            }
        }
    }

    fn enter_probe_bw(&mut self, now: SimTime) {
        self.phase = Phase::ProbeBw;
        self.cycle_index = 0;
        self.cycle_stamp = now;
    }

    fn update_probe_rtt(&mut self, expired: bool, in_flight: u64, now: SimTime) {
        if self.phase != Phase::ProbeRtt {
            if expired {
                self.phase = Phase::ProbeRtt;
                self.probe_rtt_done_at = None;
            }
            return;
        }
        if self.probe_rtt_done_at.is_none() && in_flight <= self.min_cwnd() {
            self.probe_rtt_done_at = Some(now + self.cfg.probe_rtt_duration);
        }
        if let Some(done) = self.probe_rtt_done_at {
            if now >= done {
                self.rt_prop_stamp = now;
                self.probe_rtt_done_at = None;
                if self.filled_pipe {
                    self.enter_probe_bw(now);
                } else {
                    self.phase = Phase::Startup;
                }
            }
        }
    }

    fn update_pacing_rate(&mut self) {
        let rate = (self.pacing_gain() * self.btl_bw_bps() as f64) as u64;
        // Startup never lets a low early sample throttle the ramp.
        if self.filled_pipe || rate > self.pacing_rate {
            self.pacing_rate = rate;
        }
    }

    pub fn snapshot(&self) -> CcSnapshot {
        CcSnapshot {
            btl_bw_bps: self.btl_bw_bps(),
            rt_prop_ms: self.rt_prop.map_or(0.0, |t| t.as_millis_f64()),
            phase: self.phase,
            pacing_gain: self.pacing_gain(),
            pacing_rate_bps: self.pacing_rate_bps(),
            cwnd_bytes: self.cwnd_bytes(),
        }
    }
}
