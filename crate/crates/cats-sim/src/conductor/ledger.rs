//! Hysteresis debt ledger: per-queue debt counters, eligibility states, and
//! the deadlock-resolution scaling rule.

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use super::{Priority, LEVELS};

/// Eligibility state of one priority queue.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueState {
    Eligible,
    InDebt,
}

/// Fairness knobs for a single priority level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueueFairness {
    /// Debt level at which the queue becomes ineligible. None = unbounded,
    /// the queue can never enter debt.
    pub high: Option<u64>,
    /// Debt level below which an in-debt queue becomes eligible again.
    pub low: u64,
    /// Payback multiplier applied to this queue's sends. Unused for the
    /// highest priority level (nothing above it to pay back).
    pub payback: Ratio<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FairnessConfig {
    pub queues: [QueueFairness; LEVELS],
}

impl Default for FairnessConfig {
    /// Highest priority unbounded; watermarks halving per level downward;
    /// payback multipliers doubling per level downward.
    fn default() -> Self {
        let high = [None, Some(256 * 1024), Some(128 * 1024), Some(64 * 1024), Some(32 * 1024)];
        let payback = [1u64, 1, 2, 4, 8];
        let queues = std::array::from_fn(|i| QueueFairness {
            high: high[i],
            low: high[i].map_or(0, |h| h / 2),
            payback: Ratio::from_integer(payback[i]),
        });
        FairnessConfig { queues }
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum FairnessConfigError {
    #[error("queue {level}: low watermark {low} exceeds high watermark {high}")]
    LowAboveHigh { level: u8, low: u64, high: u64 },
    #[error("queue {level}: payback multiplier must be positive")]
    NonPositivePayback { level: u8 },
}

impl FairnessConfig {
    pub fn validate(&self) -> Result<(), FairnessConfigError> {
        for (i, q) in self.queues.iter().enumerate() {
            if let Some(high) = q.high {
                if q.low > high {
                    return Err(FairnessConfigError::LowAboveHigh {
                        level: i as u8,
                        low: q.low,
                        high,
                    });
                }
            }
            if *q.payback.numer() == 0 || *q.payback.denom() == 0 {
                return Err(FairnessConfigError::NonPositivePayback { level: i as u8 });
            }
        }
        Ok(())
    }
}

/// trunc(n * m), exact rational arithmetic.
fn scaled(n: u64, m: &Ratio<u64>) -> u64 {
    let v = n as u128 * *m.numer() as u128 / *m.denom() as u128;
    u64::try_from(v).expect("payback amount overflow")
}

/// trunc(d * m / m_total), exact rational arithmetic.
fn rescaled(d: u64, m: &Ratio<u64>, m_total: &Ratio<u64>) -> u64 {
    let num = d as u128 * *m.numer() as u128 * *m_total.denom() as u128;
    let den = *m.denom() as u128 * *m_total.numer() as u128;
    u64::try_from(num / den).expect("debt rescale overflow")
}

/// Per-queue debt and eligibility tracking.
///
/// Debt moves only at explicit updates: a committed send raises the sender's
/// debt and pays down the debt of every higher-priority queue; deadlock
/// resolution rescales debts. State transitions happen at the same updates,
/// which gives the hysteresis its stickiness between the watermarks.
#[derive(Clone, Debug)]
pub struct DebtLedger {
    cfg: FairnessConfig,
    debt: [u64; LEVELS],
    state: [QueueState; LEVELS],
}

impl DebtLedger {
    pub fn new(cfg: FairnessConfig) -> Self {
        DebtLedger {
            cfg,
            debt: [0; LEVELS],
            state: [QueueState::Eligible; LEVELS],
        }
    }

    pub fn debts(&self) -> [u64; LEVELS] {
        self.debt
    }

    pub fn states(&self) -> [QueueState; LEVELS] {
        self.state
    }

    pub fn state(&self, p: Priority) -> QueueState {
        self.state[p.index()]
    }

    pub fn debt(&self, p: Priority) -> u64 {
        self.debt[p.index()]
    }

    pub fn config(&self) -> &FairnessConfig {
        &self.cfg
    }

    /// Account a committed send of `n` bytes from queue `j`.
    ///
    /// `j`'s debt grows by `n` (entering debt at the high watermark); every
    /// higher-priority queue is paid back `n * M_j`, becoming eligible again
    /// below its low watermark.
    pub fn on_commit(&mut self, j: Priority, n: u64) {
        let j = j.index();
        self.debt[j] += n;
        if let Some(high) = self.cfg.queues[j].high {
            if self.debt[j] >= high {
                self.state[j] = QueueState::InDebt;
            }
        }
        let payback = scaled(n, &self.cfg.queues[j].payback);
        for i in 0..j {
            self.debt[i] = self.debt[i].saturating_sub(payback);
            if self.state[i] == QueueState::InDebt && self.debt[i] < self.cfg.queues[i].low {
                self.state[i] = QueueState::Eligible;
            }
        }
    }

    /// Resolve an all-in-debt deadlock among the queues in `members`
    /// (the non-empty queues; all must be in debt).
    ///
    /// A single member is simply forced eligible. Otherwise debts are
    /// rescaled by `M_i / sum(M)` - truncating, so queues with the smaller
    /// multipliers (higher priorities) take the larger relative cut - and the
    /// pass repeats until a member crosses below its low watermark. Debts
    /// strictly shrink every pass, so the loop terminates; if every member's
    /// debt bottoms out at zero without crossing (a low watermark of zero),
    /// the highest-priority member is forced eligible.
    pub fn resolve_deadlock(&mut self, members: &[Priority]) {
        assert!(!members.is_empty(), "deadlock resolution with no queues");
        for &p in members {
            assert_eq!(
                self.state[p.index()],
                QueueState::InDebt,
                "deadlock resolution invoked while queue {p} is eligible"
            );
        }
        if members.len() == 1 {
            self.state[members[0].index()] = QueueState::Eligible;
            return;
        }
        let m_total: Ratio<u64> = members
            .iter()
            .map(|p| self.cfg.queues[p.index()].payback)
            .sum();
        loop {
            let mut any_eligible = false;
            let mut all_zero = true;
            for &p in members {
                let i = p.index();
                self.debt[i] = rescaled(self.debt[i], &self.cfg.queues[i].payback, &m_total);
                if self.debt[i] < self.cfg.queues[i].low {
                    self.state[i] = QueueState::Eligible;
                    any_eligible = true;
                }
                if self.debt[i] > 0 {
                    all_zero = false;
                }
            }
            if any_eligible {
                return;
            }
            if all_zero {
                // Degenerate low watermark of zero: no crossing is possible.
                self.state[members[0].index()] = QueueState::Eligible;
                return;
            }
        }
    }
}
