use std::time::Duration;

/// First instant `t >= timeframe` with no new-branch event in
/// `(t - timeframe, t]`, or `None` if that instant lies beyond `budget`.
/// `events` are the times at which new branch outcomes were covered, in
/// non-decreasing order.
pub fn detect_plateau(events: &[Duration], timeframe: Duration, budget: Duration) -> Option<Duration> {
    let mut last = Duration::ZERO;
    for &e in events {
        if e > last + timeframe {
            break;
        }
        last = last.max(e);
    }
    let switch = last + timeframe;
    (switch <= budget).then_some(switch)
}

/// Online form of [`detect_plateau`] for a running generator.
#[derive(Debug, Clone, Default)]
pub struct PlateauTracker {
    events: Vec<Duration>,
}

impl PlateauTracker {
    pub fn record_event(&mut self, at: Duration) {
        self.events.push(at);
    }

    pub fn events(&self) -> &[Duration] {
        &self.events
    }

    /// Whether the plateau instant has been reached by `now`.
    pub fn reached(&self, now: Duration, timeframe: Duration) -> bool {
        let last = self.events.last().copied().unwrap_or_default();
        now >= last + timeframe
    }
}
