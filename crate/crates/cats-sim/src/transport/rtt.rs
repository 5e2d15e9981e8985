//! Retransmission timeout estimation, RFC 6298 style, in integer
//! nanoseconds. Smoothing uses the single-division forms
//! rttvar = (3*rttvar + |srtt - R|) / 4 and srtt = (7*srtt + R) / 8.

use crate::sim::SimTime;

const GRANULARITY: SimTime = SimTime::from_millis(1);
pub const DEFAULT_MIN_RTO: SimTime = SimTime::from_millis(200);
pub const DEFAULT_MAX_RTO: SimTime = SimTime::from_secs(60);
const INITIAL_RTO: SimTime = SimTime::from_secs(1);

#[derive(Clone, Copy, Debug)]
pub struct RtoEstimator {
    srtt: Option<SimTime>,
    rttvar: SimTime,
    backoff_shift: u32,
    min_rto: SimTime,
    max_rto: SimTime,
}

impl Default for RtoEstimator {
    fn default() -> Self {
        Self::new()
    }
}

impl RtoEstimator {
    pub fn new() -> RtoEstimator {
        Self::with_bounds(DEFAULT_MIN_RTO, DEFAULT_MAX_RTO)
    }

    pub fn with_bounds(min_rto: SimTime, max_rto: SimTime) -> RtoEstimator {
        assert!(SimTime::ZERO < min_rto && min_rto <= max_rto, "bad RTO bounds");
        RtoEstimator { srtt: None, rttvar: SimTime::ZERO, backoff_shift: 0, min_rto, max_rto }
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt
    }

    /// Fold in one RTT measurement. Also clears any timeout backoff.
    pub fn on_sample(&mut self, r: SimTime) {
        match self.srtt {
            None => {
                self.srtt = Some(r);
                self.rttvar = r / 2;
            }
            Some(srtt) => {
                let err = if srtt > r { srtt - r } else { r - srtt };
                self.rttvar = (self.rttvar * 3 + err) / 4;
                self.srtt = Some((srtt * 7 + r) / 8);
            }
        }
        self.backoff_shift = 0;
    }

    /// Exponential backoff after a timeout fires.
    pub fn on_timeout(&mut self) {
        self.backoff_shift = (self.backoff_shift + 1).min(16);
    }

    /// Current timeout: clamp(srtt + max(G, 4*rttvar)) << backoff, capped.
    pub fn rto(&self) -> SimTime {
        let base = match self.srtt {
            None => INITIAL_RTO,
            Some(srtt) => srtt + GRANULARITY.max(self.rttvar * 4),
        };
        let clamped = base.max(self.min_rto).min(self.max_rto);
        (clamped * (1u64 << self.backoff_shift)).min(self.max_rto)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_sample_seeds_both_estimators() {
        let mut e = RtoEstimator::new();
        assert_eq!(e.rto(), SimTime::from_secs(1));
        e.on_sample(SimTime::from_millis(100));
        // srtt = 100 ms, rttvar = 50 ms, rto = 100 + 4*50 = 300 ms.
        assert_eq!(e.srtt(), Some(SimTime::from_millis(100)));
        assert_eq!(e.rto(), SimTime::from_millis(300));
    }

    #[test]
    fn second_identical_sample_shrinks_variance() {
        let mut e = RtoEstimator::new();
        e.on_sample(SimTime::from_millis(100));
        e.on_sample(SimTime::from_millis(100));
        // rttvar = (3*50 + 0)/4 = 37.5 ms, rto = 100 + 150 = 250 ms.
        assert_eq!(e.rto(), SimTime::from_micros(250_000));
    }

    #[test]
    fn constant_rtt_converges_to_srtt_plus_granularity_floor() {
        let mut e = RtoEstimator::new();
        for _ in 0..64 {
            e.on_sample(SimTime::from_millis(100));
        }
        // Variance decays to zero; the 1 ms granularity floor remains,
        // then the 200 ms minimum wins: rto = max(101 ms, 200 ms).
        assert_eq!(e.srtt(), Some(SimTime::from_millis(100)));
        assert_eq!(e.rto(), SimTime::from_millis(200));
    }

    #[test]
    fn timeout_doubles_until_capped() {
        let mut e = RtoEstimator::new();
        e.on_sample(SimTime::from_millis(100));
        assert_eq!(e.rto(), SimTime::from_millis(300));
        e.on_timeout();
        assert_eq!(e.rto(), SimTime::from_millis(600));
        e.on_timeout();
        assert_eq!(e.rto(), SimTime::from_millis(1200));
        for _ in 0..10 {
            e.on_timeout();
        }
        assert_eq!(e.rto(), SimTime::from_secs(60));
    }

    #[test]
    fn fresh_sample_clears_backoff() {
        let mut e = RtoEstimator::new();
        e.on_sample(SimTime::from_millis(100));
        e.on_timeout();
        e.on_timeout();
        e.on_sample(SimTime::from_millis(100));
        assert_eq!(e.rto(), SimTime::from_micros(250_000));
    }

    #[test]
    fn jittery_path_widens_the_timeout() {
        let mut e = RtoEstimator::new();
        e.on_sample(SimTime::from_millis(50));
        e.on_sample(SimTime::from_millis(150));
        // srtt = (7*50 + 150)/8 = 62.5 ms; rttvar = (3*25 + 100)/4 = 43.75 ms.
        assert_eq!(e.srtt(), Some(SimTime::from_micros(62_500)));
        assert_eq!(e.rto(), SimTime::from_micros(62_500 + 4 * 43_750));
    }
}
