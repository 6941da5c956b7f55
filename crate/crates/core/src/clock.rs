//! Planning budgets and the clocks that measure them.
//!
//! Two clocks are available. [`Clock::Wall`] measures real elapsed time.
//! [`Clock::Work`] measures elapsed time as accumulated work units (state
//! checks and distance evaluations) divided by a fixed rate, which makes
//! every budgeted run reproducible bit-for-bit across machines and loads.

use std::cell::Cell;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Work units per virtual second. Calibrated so that one virtual second
/// takes roughly one wall second for an optimized build on a single core of
/// the reference machine.
pub const DEFAULT_WORK_RATE: f64 = 1.8e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Clock {
    Wall,
    Work { units_per_second: f64 },
}

impl Default for Clock {
    fn default() -> Self {
        Clock::Work {
            units_per_second: DEFAULT_WORK_RATE,
        }
    }
}

/// Stopping condition of an anytime planner. At least one limit is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub seconds: Option<f64>,
    pub max_iterations: Option<u64>,
    #[serde(default)]
    pub clock: Clock,
}

impl Budget {
    pub fn seconds(seconds: f64) -> Self {
        Budget {
            seconds: Some(seconds),
            max_iterations: None,
            clock: Clock::default(),
        }
    }

    pub fn iterations(n: u64) -> Self {
        Budget {
            seconds: None,
            max_iterations: Some(n),
            clock: Clock::default(),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_max_iterations(mut self, n: u64) -> Self {
        self.max_iterations = Some(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.seconds.is_none() && self.max_iterations.is_none() {
            return Err(Error::InvalidConfig(
                "budget has neither a time nor an iteration limit".into(),
            ));
        }
        if let Some(s) = self.seconds {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "budget seconds must be positive, got {s}"
                )));
            }
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidConfig(
                "budget iterations must be positive".into(),
            ));
        }
        if let Clock::Work { units_per_second } = self.clock {
            if !(units_per_second.is_finite() && units_per_second > 0.0) {
                return Err(Error::InvalidConfig(
                    "work clock rate must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn exhausted(&self, watch: &Stopwatch, iterations: u64) -> bool {
        if let Some(n) = self.max_iterations {
            if iterations >= n {
                return true;
            }
        }
        match self.seconds {
            Some(s) => watch.elapsed() >= s,
            None => false,
        }
    }
}

/// Elapsed-time meter for one planning run.
#[derive(Debug)]
pub struct Stopwatch {
    clock: Clock,
    started: Instant,
    work: Cell<u64>,
}

impl Stopwatch {
    pub fn start(clock: Clock) -> Self {
        Stopwatch {
            clock,
            started: Instant::now(),
            work: Cell::new(0),
        }
    }

    #[inline]
    pub fn charge(&self, units: u64) {
        self.work.set(self.work.get() + units);
    }

    pub fn work(&self) -> u64 {
        self.work.get()
    }

    /// Seconds elapsed on this stopwatch's clock.
    pub fn elapsed(&self) -> f64 {
        match self.clock {
            Clock::Wall => self.started.elapsed().as_secs_f64(),
            Clock::Work { units_per_second } => self.work.get() as f64 / units_per_second,
        }
    }
}
