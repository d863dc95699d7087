//! Exponential backoff with full jitter for transport-level retries.

use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Backoff policy. `max_retries` counts retries, so a call makes at most
/// `max_retries + 1` attempts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 250,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Policy with no sleeping, for replay-driven tests.
    pub fn immediate(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    pub fn attempts(&self) -> u32 {
        self.max_retries + 1
    }

    /// Full-jitter delay before retry number `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self
            .base_delay_ms
            .saturating_mul(2u64.checked_pow(attempt).unwrap_or(u64::MAX));
        let capped = exp.min(self.max_delay_ms);
        let jittered = (capped as f64 * rand::random::<f64>()) as u64;
        Duration::from_millis(jittered)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attempts_are_bounded() {
        assert_eq!(RetryPolicy::default().attempts(), 4);
        assert_eq!(RetryPolicy::immediate(0).attempts(), 1);
    }

    #[test]
    fn delay_is_capped_and_jittered() {
        let policy = RetryPolicy {
            max_retries: 10,
            base_delay_ms: 100,
            max_delay_ms: 1_000,
        };
        for attempt in 0..12 {
            let d = policy.delay(attempt);
            assert!(d.as_millis() <= 1_000);
        }
    }

    #[test]
    fn immediate_policy_never_sleeps() {
        let policy = RetryPolicy::immediate(3);
        assert_eq!(policy.delay(5), Duration::ZERO);
    }
}
