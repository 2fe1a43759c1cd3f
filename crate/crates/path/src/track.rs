//! Detects robots that stray from their planned route.

use std::collections::BTreeMap;

use crate::map::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conformance {
    Ok,
    NotTracked,
    /// Off the route by `deviation` meters, more than the tolerance.
    Abort { deviation: f64 },
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(a.lerp(b, s))
}

#[derive(Debug, Clone)]
struct Route {
    pts: Vec<Point>,
    seg: usize,
}

#[derive(Debug, Clone)]
pub struct ConformanceTracker {
    pub epsilon: f64,
    routes: BTreeMap<String, Route>,
}

impl Default for ConformanceTracker {
    fn default() -> Self {
        Self::new(0.5)
    }
}

impl ConformanceTracker {
    pub fn new(epsilon: f64) -> Self {
        ConformanceTracker {
            epsilon,
            routes: BTreeMap::new(),
        }
    }

    /// Starts tracking `robot` along the polyline `pts`.
    pub fn set_route(&mut self, robot: &str, pts: Vec<Point>) {
        self.routes.insert(robot.to_string(), Route { pts, seg: 0 });
    }

    pub fn clear(&mut self, robot: &str) {
        self.routes.remove(robot);
    }

    pub fn is_tracking(&self, robot: &str) -> bool {
        self.routes.contains_key(robot)
    }

    /// Checks a reported position. Progress along the route only moves
    /// forward, so a robot cannot match a segment it already left.
    pub fn track(&mut self, robot: &str, p: Point) -> Conformance {
        let Some(route) = self.routes.get_mut(robot) else {
            return Conformance::NotTracked;
        };
        let deviation = if route.pts.len() < 2 {
            route.pts.first().map_or(0.0, |a| p.distance(*a))
        } else {
            let (best, d) = (route.seg..route.pts.len() - 1)
                .map(|i| (i, segment_distance(p, route.pts[i], route.pts[i + 1])))
                .fold((route.seg, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            route.seg = best;
            d
        };
        if deviation > self.epsilon {
            Conformance::Abort { deviation }
        } else {
            Conformance::Ok
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviation_beyond_epsilon_aborts() {
        let mut t = ConformanceTracker::new(0.5);
        t.set_route("r", vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0)]);
        assert_eq!(t.track("r", Point::new(2.0, 0.5)), Conformance::Ok);
        assert!(matches!(
            t.track("r", Point::new(2.0, 0.51)),
            Conformance::Abort { .. }
        ));
        assert_eq!(t.track("x", Point::new(0.0, 0.0)), Conformance::NotTracked);
    }

    #[test]
    fn progress_is_monotone() {
        let mut t = ConformanceTracker::new(0.3);
        let route = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        t.set_route("r", route);
        assert_eq!(t.track("r", Point::new(2.0, 1.9)), Conformance::Ok);
        // Back near the first leg, which the robot already left.
        assert!(matches!(
            t.track("r", Point::new(1.0, 0.0)),
            Conformance::Abort { .. }
        ));
    }
}
