use std::cell::Cell;
use std::time::{Duration, Instant};

/// Session time source. Costs of LLM calls and test runs are reported to
/// the clock through [`Clock::charge`]; a wall clock ignores them because the
/// time has already passed.
pub trait Clock {
    fn elapsed(&self) -> Duration;
    fn charge(&self, cost: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn start() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    fn charge(&self, _cost: Duration) {}
}

/// Simulated time that only advances when charged.
#[derive(Debug, Default)]
pub struct SimClock {
    now: Cell<Duration>,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Clock for SimClock {
    fn elapsed(&self) -> Duration {
        self.now.get()
    }

    fn charge(&self, cost: Duration) {
        self.now.set(self.now.get() + cost);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_clock_advances_only_when_charged() {
        let c = SimClock::new();
        assert_eq!(c.elapsed(), Duration::ZERO);
        c.charge(Duration::from_secs(3));
        c.charge(Duration::from_millis(500));
        assert_eq!(c.elapsed(), Duration::from_millis(3500));
    }

    #[test]
    fn system_clock_ignores_charges() {
        let c = SystemClock::start();
        c.charge(Duration::from_secs(3600));
        assert!(c.elapsed() < Duration::from_secs(60));
    }
}
