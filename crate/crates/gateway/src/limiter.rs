//! Sliding-window request pacing, testable against a simulated clock.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Source of time for pacing and backoff. Production code uses
/// [`SystemClock`]; tests use [`SimClock`] so pacing logic can be verified
/// in microseconds of wall time.
pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Simulated clock: `sleep` advances time instead of blocking.
#[derive(Debug)]
pub struct SimClock {
    start: Instant,
    offset: Mutex<Duration>,
}

impl SimClock {
    pub fn new() -> SimClock {
        SimClock { start: Instant::now(), offset: Mutex::new(Duration::ZERO) }
    }

    pub fn elapsed(&self) -> Duration {
        *self.offset.lock().unwrap()
    }
}

impl Default for SimClock {
    fn default() -> Self {
        SimClock::new()
    }
}

impl Clock for SimClock {
    fn now(&self) -> Instant {
        self.start + *self.offset.lock().unwrap()
    }

    fn sleep(&self, duration: Duration) {
        *self.offset.lock().unwrap() += duration;
    }
}

/// Per-provider pacing: at most `rpm` acquisitions in any sliding
/// 60-second window. `acquire` blocks (via the clock) until a slot frees.
#[derive(Debug)]
pub struct RateLimiter {
    window: Duration,
    max_in_window: usize,
    sent: VecDeque<Instant>,
}

impl RateLimiter {
    pub fn new(rpm: u32) -> RateLimiter {
        RateLimiter {
            window: Duration::from_secs(60),
            max_in_window: rpm.max(1) as usize,
            sent: VecDeque::new(),
        }
    }

    /// Wait (on the clock) until a request may be sent, then claim the slot.
    pub fn acquire(&mut self, clock: &dyn Clock) -> Instant {
        loop {
            let now = clock.now();
            while let Some(&oldest) = self.sent.front() {
                if now.duration_since(oldest) >= self.window {
                    self.sent.pop_front();
                } else {
                    break;
                }
            }
            if self.sent.len() < self.max_in_window {
                self.sent.push_back(now);
                return now;
            }
            // Window is full: sleep exactly until the oldest entry expires.
            let oldest = *self.sent.front().expect("window is full");
            let wait = self.window - now.duration_since(oldest);
            clock.sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_clock_advances_only_through_sleep() {
        let clock = SimClock::new();
        let a = clock.now();
        let b = clock.now();
        assert_eq!(a, b);
        clock.sleep(Duration::from_secs(7));
        assert_eq!(clock.now().duration_since(a), Duration::from_secs(7));
    }

    /// Oracle: for every recorded send, count sends in the 60s window
    /// starting at it; none may exceed rpm + 1.
    fn max_in_any_window(times: &[Instant]) -> usize {
        let window = Duration::from_secs(60);
        times
            .iter()
            .map(|&start| {
                times
                    .iter()
                    .filter(|&&t| t >= start && t.duration_since(start) < window)
                    .count()
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn never_exceeds_rate_in_any_sliding_window() {
        let clock = SimClock::new();
        let mut limiter = RateLimiter::new(5);
        let times: Vec<Instant> = (0..23).map(|_| limiter.acquire(&clock)).collect();
        assert!(max_in_any_window(&times) <= 6);
        // 23 requests at 5 rpm require at least four full windows to open.
        assert!(clock.elapsed() >= Duration::from_secs(180));
    }

    #[test]
    fn burst_below_limit_never_sleeps() {
        let clock = SimClock::new();
        let mut limiter = RateLimiter::new(10);
        for _ in 0..10 {
            limiter.acquire(&clock);
        }
        assert_eq!(clock.elapsed(), Duration::ZERO);
    }

    #[test]
    fn slots_reopen_after_the_window_passes() {
        let clock = SimClock::new();
        let mut limiter = RateLimiter::new(2);
        limiter.acquire(&clock);
        limiter.acquire(&clock);
        clock.sleep(Duration::from_secs(61));
        let before = clock.elapsed();
        limiter.acquire(&clock);
        assert_eq!(clock.elapsed(), before);
    }
}
