use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClockMode {
    Realtime,
    /// Simulated time runs `factor` times faster than wall time.
    Accelerated(f64),
    /// Time moves only when stepped; nothing waits on the wall clock.
    Stepped,
}

impl ClockMode {
    /// Parses `realtime`, `stepped` or `accelerated:<factor>`.
    pub fn parse(s: &str) -> Option<ClockMode> {
        match s {
            "realtime" => Some(ClockMode::Realtime),
            "stepped" => Some(ClockMode::Stepped),
            _ => {
                let f: f64 = s.strip_prefix("accelerated:")?.parse().ok()?;
                (f > 0.0).then_some(ClockMode::Accelerated(f))
            }
        }
    }
}

/// Simulated milliseconds; never goes backwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    now_ms: u64,
    mode: ClockMode,
}

impl SimClock {
    pub fn new(mode: ClockMode) -> Self {
        SimClock { now_ms: 0, mode }
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn advance(&mut self, dt_ms: u64) -> u64 {
        self.now_ms += dt_ms;
        self.now_ms
    }

    /// Wall time a step of `dt_ms` should take in this mode.
    pub fn wall_time(&self, dt_ms: u64) -> Option<Duration> {
        match self.mode {
            ClockMode::Realtime => Some(Duration::from_millis(dt_ms)),
            ClockMode::Accelerated(f) => Some(Duration::from_secs_f64(dt_ms as f64 / 1000.0 / f)),
            ClockMode::Stepped => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_parse() {
        assert_eq!(ClockMode::parse("stepped"), Some(ClockMode::Stepped));
        assert_eq!(ClockMode::parse("accelerated:4"), Some(ClockMode::Accelerated(4.0)));
        assert_eq!(ClockMode::parse("accelerated:0"), None);
        assert_eq!(ClockMode::parse("fast"), None);
    }

    #[test]
    fn advances_monotonically() {
        let mut c = SimClock::new(ClockMode::Stepped);
        assert_eq!(c.advance(0), 0);
        assert_eq!(c.advance(50), 50);
        assert_eq!(c.wall_time(50), None);
        let c = SimClock::new(ClockMode::Accelerated(10.0));
        assert_eq!(c.wall_time(1000), Some(Duration::from_millis(100)));
    }
}
