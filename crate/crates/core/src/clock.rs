use serde::{Deserialize, Serialize};

/// Default simulation resolution: 10 ticks per second.
pub const DEFAULT_DT: f64 = 0.1;

/// Fixed-step simulation clock.
///
/// Time is always derived as `tick × dt` rather than accumulated, so row `k`
/// of every trajectory carries the same timestamp regardless of how the run
/// was split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    tick: u64,
    dt: f64,
}

impl SimClock {
    pub fn new(dt: f64) -> Option<Self> {
        (dt.is_finite() && dt > 0.0).then_some(Self { tick: 0, dt })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.time_at(self.tick)
    }

    pub fn time_at(&self, tick: u64) -> f64 {
        tick as f64 * self.dt
    }

    pub(crate) fn advance(&mut self) {
        self.tick += 1;
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self {
            tick: 0,
            dt: DEFAULT_DT,
        }
    }
}
