//! Turns `GOTO_SET` entries into one waypoint command at a time.
//!
//! Each leg is sent as a `goto` action with `[x, y]` arguments and the
//! instance id `<goto instance>.w<k>`, where `k` counts the legs sent for
//! that goto, so a re-planned movement never reuses a leg name. A leg is
//! sent `delay_s` seconds after the robot reached the previous waypoint.

use std::collections::BTreeMap;

use resh_protocol::{GotoEntry, StatusKind, Waypoint};

#[derive(Debug, Clone, PartialEq)]
pub enum DispatchOut {
    Send {
        robot: String,
        instance: String,
        x: f64,
        y: f64,
    },
    Cancel {
        instance: String,
    },
    /// The robot reached the last waypoint of `goto`.
    Arrived { robot: String, goto: String },
    /// A leg failed; the movement for `goto` is abandoned.
    Failed {
        robot: String,
        goto: String,
        detail: String,
    },
}

#[derive(Debug, Clone)]
struct Active {
    goto: String,
    waypoints: Vec<Waypoint>,
    next: usize,
    ready_at_ms: u64,
    in_flight: Option<String>,
}

#[derive(Debug, Default)]
pub struct Dispatcher {
    active: BTreeMap<String, Active>,
    /// Legs sent so far, per goto instance.
    legs: BTreeMap<String, usize>,
}

fn delay_ms(w: &Waypoint) -> u64 {
    (w.delay_s.max(0.0) * 1000.0).round() as u64
}

impl Dispatcher {
    /// Replaces whatever the robot was doing with this entry.
    pub fn assign(&mut self, entry: &GotoEntry, now_ms: u64) -> Vec<DispatchOut> {
        let mut out = self.cancel(&entry.robot);
        if entry.waypoints.is_empty() {
            out.push(DispatchOut::Arrived {
                robot: entry.robot.clone(),
                goto: entry.instance.clone(),
            });
            return out;
        }
        self.active.insert(
            entry.robot.clone(),
            Active {
                goto: entry.instance.clone(),
                ready_at_ms: now_ms + delay_ms(&entry.waypoints[0]),
                waypoints: entry.waypoints.clone(),
                next: 0,
                in_flight: None,
            },
        );
        out.extend(self.poll(now_ms));
        out
    }

    /// Sends every leg whose delay has elapsed.
    pub fn poll(&mut self, now_ms: u64) -> Vec<DispatchOut> {
        let mut out = Vec::new();
        for (robot, a) in &mut self.active {
            if a.in_flight.is_none() && a.ready_at_ms <= now_ms {
                let w = a.waypoints[a.next];
                let k = self.legs.entry(a.goto.clone()).or_default();
                let instance = format!("{}.w{k}", a.goto);
                *k += 1;
                a.in_flight = Some(instance.clone());
                out.push(DispatchOut::Send {
                    robot: robot.clone(),
                    instance,
                    x: w.x,
                    y: w.y,
                });
            }
        }
        out
    }

    /// Earliest time a pending leg becomes due.
    pub fn next_wakeup(&self) -> Option<u64> {
        self.active
            .values()
            .filter(|a| a.in_flight.is_none())
            .map(|a| a.ready_at_ms)
            .min()
    }

    /// Whether `instance` is a leg this dispatcher sent.
    pub fn owns(&self, instance: &str) -> bool {
        self.active
            .values()
            .any(|a| a.in_flight.as_deref() == Some(instance))
    }

    pub fn on_status(&mut self, instance: &str, status: StatusKind, now_ms: u64) -> Vec<DispatchOut> {
        let Some(robot) = self
            .active
            .iter()
            .find(|(_, a)| a.in_flight.as_deref() == Some(instance))
            .map(|(r, _)| r.clone())
        else {
            return Vec::new();
        };
        if !status.is_terminal() {
            return Vec::new();
        }
        let a = self.active.get_mut(&robot).expect("found above");
        a.in_flight = None;
        if status != StatusKind::Succeeded {
            let a = self.active.remove(&robot).expect("found above");
            return vec![DispatchOut::Failed {
                robot,
                goto: a.goto,
                detail: format!("leg {instance} {status:?}").to_lowercase(),
            }];
        }
        a.next += 1;
        if a.next == a.waypoints.len() {
            let a = self.active.remove(&robot).expect("found above");
            return vec![DispatchOut::Arrived { robot, goto: a.goto }];
        }
        a.ready_at_ms = now_ms + delay_ms(&a.waypoints[a.next]);
        self.poll(now_ms)
    }

    /// Stops the robot's movement, cancelling the leg in flight.
    pub fn cancel(&mut self, robot: &str) -> Vec<DispatchOut> {
        match self.active.remove(robot).and_then(|a| a.in_flight) {
            Some(instance) => vec![DispatchOut::Cancel { instance }],
            None => Vec::new(),
        }
    }

    /// The goto instance the robot is moving for, if any.
    pub fn moving_for(&self, robot: &str) -> Option<&str> {
        self.active.get(robot).map(|a| a.goto.as_str())
    }

    pub fn is_idle(&self) -> bool {
        self.active.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry() -> GotoEntry {
        GotoEntry {
            robot: "r".into(),
            instance: "p1.a0.goto".into(),
            waypoints: vec![
                Waypoint { x: 0.0, y: 0.0, delay_s: 0.0 },
                Waypoint { x: 1.0, y: 0.0, delay_s: 2.0 },
            ],
        }
    }

    #[test]
    fn legs_follow_delays() {
        let mut d = Dispatcher::default();
        let out = d.assign(&entry(), 100);
        assert!(matches!(&out[..], [DispatchOut::Send { instance, .. }] if instance == "p1.a0.goto.w0"));
        assert!(d.on_status("p1.a0.goto.w0", StatusKind::Succeeded, 150).is_empty());
        assert_eq!(d.next_wakeup(), Some(2150));
        assert!(d.poll(2149).is_empty());
        assert_eq!(d.poll(2150).len(), 1);
        let out = d.on_status("p1.a0.goto.w1", StatusKind::Succeeded, 3000);
        assert!(matches!(&out[..], [DispatchOut::Arrived { goto, .. }] if goto == "p1.a0.goto"));
        assert!(d.is_idle());
    }

    #[test]
    fn reassignment_cancels_the_leg_in_flight() {
        let mut d = Dispatcher::default();
        d.assign(&entry(), 0);
        let out = d.assign(&entry(), 10);
        assert_eq!(
            out[0],
            DispatchOut::Cancel {
                instance: "p1.a0.goto.w0".into()
            }
        );
        assert!(matches!(&out[1], DispatchOut::Send { instance, .. } if instance == "p1.a0.goto.w1"));
        assert!(d.on_status("p1.a0.goto.w0", StatusKind::Terminated, 20).is_empty());
        assert!(d.owns("p1.a0.goto.w1"));
        assert!(!d.owns("unknown"));
    }

    #[test]
    fn failed_leg_abandons_the_movement() {
        let mut d = Dispatcher::default();
        d.assign(&entry(), 0);
        let out = d.on_status("p1.a0.goto.w0", StatusKind::Failed, 5);
        assert!(matches!(&out[..], [DispatchOut::Failed { .. }]));
        assert!(d.moving_for("r").is_none());
    }
}
