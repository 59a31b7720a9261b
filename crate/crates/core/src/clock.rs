//! Event time. All scheduling (timeslots, communication phases, the sliding
//! window) runs on record timestamps, never on the wall clock.

use core::fmt;
use core::ops::{Add, Sub};

use thiserror::Error;

/// Seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const fn from_secs(secs: i64) -> Self {
        Timestamp(secs)
    }

    pub const fn secs(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

impl Add<i64> for Timestamp {
    type Output = Timestamp;

    fn add(self, secs: i64) -> Timestamp {
        Timestamp(self.0 + secs)
    }
}

impl Sub<i64> for Timestamp {
    type Output = Timestamp;

    fn sub(self, secs: i64) -> Timestamp {
        Timestamp(self.0 - secs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("timestamp {next} is earlier than the clock reading {current}")]
    Backwards { current: Timestamp, next: Timestamp },
    #[error("mark {mark} lies in the future of the clock reading {current}")]
    MarkInFuture { current: Timestamp, mark: Timestamp },
    #[error("the clock has not observed any record yet")]
    NotStarted,
}

/// Monotone clock driven by delivered records.
///
/// `current` is always the timestamp of the most recent record and `epoch`
/// the timestamp of the first one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventClock {
    state: Option<(Timestamp, Timestamp)>,
}

impl EventClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn epoch(&self) -> Option<Timestamp> {
        self.state.map(|(epoch, _)| epoch)
    }

    pub fn current(&self) -> Option<Timestamp> {
        self.state.map(|(_, current)| current)
    }

    pub fn advance(&mut self, to: Timestamp) -> Result<(), ClockError> {
        match &mut self.state {
            None => self.state = Some((to, to)),
            Some((_, current)) => {
                if to < *current {
                    return Err(ClockError::Backwards {
                        current: *current,
                        next: to,
                    });
                }
                *current = to;
            }
        }
        Ok(())
    }

    /// Seconds elapsed between `mark` and the current reading.
    pub fn elapsed_since(&self, mark: Timestamp) -> Result<i64, ClockError> {
        let current = self.current().ok_or(ClockError::NotStarted)?;
        if mark > current {
            return Err(ClockError::MarkInFuture { current, mark });
        }
        Ok(current.0 - mark.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(h: i64, m: i64, s: i64) -> Timestamp {
        Timestamp(h * 3600 + m * 60 + s)
    }

    #[test]
    fn elapsed_examples() {
        let mut clock = EventClock::new();
        clock.advance(at(12, 0, 0)).unwrap();
        assert_eq!(clock.elapsed_since(at(11, 0, 0)), Ok(3600));
        assert_eq!(clock.elapsed_since(at(12, 0, 0)), Ok(0));

        let mut clock = EventClock::new();
        clock.advance(at(16, 0, 0)).unwrap();
        clock.advance(at(18, 30, 0)).unwrap();
        assert_eq!(clock.elapsed_since(at(16, 0, 0)), Ok(9000));
        assert_eq!(clock.epoch(), Some(at(16, 0, 0)));
    }

    #[test]
    fn future_mark_is_an_error() {
        let mut clock = EventClock::new();
        clock.advance(at(10, 0, 0)).unwrap();
        assert!(matches!(
            clock.elapsed_since(at(10, 0, 1)),
            Err(ClockError::MarkInFuture { .. })
        ));
        assert_eq!(
            EventClock::new().elapsed_since(at(0, 0, 0)),
            Err(ClockError::NotStarted)
        );
    }

    #[test]
    fn never_decreases() {
        let mut clock = EventClock::new();
        clock.advance(Timestamp(10)).unwrap();
        clock.advance(Timestamp(10)).unwrap();
        assert!(clock.advance(Timestamp(9)).is_err());
        assert_eq!(clock.current(), Some(Timestamp(10)));
    }
}
