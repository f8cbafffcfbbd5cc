use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Exponential backoff with full jitter: the wait before retry `n` is drawn
/// uniformly from `[0, min(cap, initial * factor^(n-1))]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub initial_ms: u64,
    pub factor: f64,
    pub cap_ms: u64,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { initial_ms: 1_000, factor: 2.0, cap_ms: 30_000 }
    }
}

impl Backoff {
    /// Upper bound of the wait before retry `retry` (1-based).
    pub fn ceiling(&self, retry: u32) -> Duration {
        let exp = self.factor.powi(retry.saturating_sub(1).min(64) as i32);
        let ms = (self.initial_ms as f64 * exp).min(self.cap_ms as f64);
        Duration::from_millis(ms.max(0.0) as u64)
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let ceiling = self.ceiling(retry).as_millis() as u64;
        if ceiling == 0 {
            return Duration::ZERO;
        }
        Duration::from_millis(rand::random_range(0..=ceiling))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceilings_double_then_cap() {
        let b = Backoff::default();
        let secs: Vec<u64> = (1..=7).map(|n| b.ceiling(n).as_secs()).collect();
        assert_eq!(secs, vec![1, 2, 4, 8, 16, 30, 30]);
        assert!(b.ceiling(1000) == Duration::from_secs(30));
    }

    #[test]
    fn jitter_stays_under_ceiling() {
        let b = Backoff { initial_ms: 10, factor: 2.0, cap_ms: 25 };
        for n in 1..6 {
            assert!(b.delay(n) <= b.ceiling(n));
        }
        assert_eq!(Backoff { initial_ms: 0, ..b }.delay(3), Duration::ZERO);
    }
}
