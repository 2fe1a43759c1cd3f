//! Timed piecewise-linear motion along waypoints.

use resh_protocol::Waypoint;

use crate::map::Point;

/// Positions over time. The robot holds its last position forever.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    knots: Vec<(f64, Point)>,
}

impl Trajectory {
    pub fn stationary(p: Point) -> Self {
        Trajectory {
            knots: vec![(0.0, p)],
        }
    }

    /// Starting at `start` at time zero, for each waypoint wait its
    /// `delay_s` and then drive straight to it at `speed`.
    pub fn follow(start: Point, waypoints: &[Waypoint], speed: f64) -> Self {
        let mut knots = vec![(0.0, start)];
        let mut t = 0.0;
        let mut at = start;
        for w in waypoints {
            let to = Point::new(w.x, w.y);
            if w.delay_s > 0.0 {
                t += w.delay_s;
                knots.push((t, at));
            }
            let d = at.distance(to);
            if d > 0.0 {
                t += d / speed;
                knots.push((t, to));
            }
            at = to;
        }
        Trajectory { knots }
    }

    /// Time at which the robot stops for good.
    pub fn end_time(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.0)
    }

    pub fn end(&self) -> Point {
        self.knots.last().map_or(Point::default(), |k| k.1)
    }

    pub fn length(&self) -> f64 {
        self.knots.windows(2).map(|w| w[0].1.distance(w[1].1)).sum()
    }

    pub fn at(&self, t: f64) -> Point {
        let i = self.knots.partition_point(|k| k.0 <= t);
        if i == 0 {
            return self.knots[0].1;
        }
        if i == self.knots.len() {
            return self.knots[i - 1].1;
        }
        let (t0, p0) = self.knots[i - 1];
        let (t1, p1) = self.knots[i];
        if t1 <= t0 {
            return p1;
        }
        p0.lerp(p1, (t - t0) / (t1 - t0))
    }

    /// This trajectory delayed by `offset` seconds, holding its start.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut knots = vec![(0.0, self.knots[0].1)];
        knots.extend(self.knots.iter().map(|(t, p)| (t + offset, *p)));
        Trajectory { knots }
    }
}

/// Smallest distance between two trajectories sampled every `dt` seconds
/// from zero until both have stopped.
pub fn min_separation(a: &Trajectory, b: &Trajectory, dt: f64) -> f64 {
    let horizon = a.end_time().max(b.end_time());
    let steps = (horizon / dt).ceil() as usize;
    (0..=steps)
        .map(|k| (k as f64 * dt).min(horizon))
        .map(|t| a.at(t).distance(b.at(t)))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(x: f64, y: f64, delay_s: f64) -> Waypoint {
        Waypoint { x, y, delay_s }
    }

    #[test]
    fn delays_hold_position() {
        let t = Trajectory::follow(Point::new(0.0, 0.0), &[wp(2.0, 0.0, 1.0)], 1.0);
        assert_eq!(t.at(0.5), Point::new(0.0, 0.0));
        assert_eq!(t.at(2.0), Point::new(1.0, 0.0));
        assert_eq!(t.at(10.0), Point::new(2.0, 0.0));
        assert_eq!(t.end_time(), 3.0);
        assert_eq!(t.length(), 2.0);
    }

    #[test]
    fn separation_of_crossing_robots() {
        let a = Trajectory::follow(Point::new(0.0, 0.0), &[wp(2.0, 0.0, 0.0)], 1.0);
        let b = Trajectory::follow(Point::new(2.0, 0.0), &[wp(0.0, 0.0, 0.0)], 1.0);
        assert!(min_separation(&a, &b, 0.05) < 1e-9);
        let c = Trajectory::follow(Point::new(2.0, 1.0), &[wp(0.0, 1.0, 0.0)], 1.0).shifted(0.5);
        assert_eq!(c.at(0.5), Point::new(2.0, 1.0));
        assert!((min_separation(&a, &c, 0.05) - 1.0).abs() < 1e-9);
    }
}
