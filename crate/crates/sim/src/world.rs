//! The world stepper: owns every mock robot's physical state and speaks
//! for the agents on the protocol.

use std::collections::BTreeMap;

use log::{info, warn};
use resh_path::{Point, WorldMap};
use resh_protocol::{Body, Capability, Message, Pose, StatusKind, Value};
use thiserror::Error;

use crate::clock::{ClockMode, SimClock};
use crate::config::{ActionScript, MockRobotConfig, PoolError};

/// Radians per second for `twist`.
pub const TWIST_RATE: f64 = 1.0;

/// Every robot reports its pose at least this often.
pub const POSE_PERIOD_MS: u64 = 500;

/// Sender of messages that stand in for human input.
pub const INJECT_SENDER: &str = "inject";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown robot {0}")]
    UnknownRobot(String),
    #[error("no reserve robot named {0}")]
    UnknownReserve(String),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

/// A change to the world made from outside the runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    SetProperty {
        robot: String,
        prop: String,
        value: Value,
    },
    FireEvent {
        name: String,
        args: Vec<Value>,
    },
    RetractCapability {
        robot: String,
        action: String,
    },
    RemoveRobot {
        robot: String,
    },
    /// Brings a reserve robot from the pool file into the pool.
    SpawnRobot {
        robot: String,
    },
    /// Pushes a robot off its course, as a transient obstruction would.
    Nudge {
        robot: String,
        dx: f64,
        dy: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Work {
    Drive { to: Point },
    Timed { remaining_ms: i64, fail: bool },
    Hold,
    Twist { remaining_ms: i64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Activity {
    instance: String,
    work: Work,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockRobot {
    pub config: MockRobotConfig,
    pub pose: Pose,
    pub battery: f64,
    pub properties: BTreeMap<String, Value>,
    pub capabilities: Vec<Capability>,
    /// Metres driven since spawning.
    pub odometer: f64,
    current: Option<Activity>,
}

impl MockRobot {
    fn new(config: MockRobotConfig) -> Self {
        MockRobot {
            pose: config.pose,
            battery: config.battery,
            properties: config.properties.clone(),
            capabilities: config.capabilities.clone(),
            odometer: 0.0,
            current: None,
            config,
        }
    }

    /// The instance the robot is working on.
    pub fn current(&self) -> Option<&str> {
        self.current.as_ref().map(|a| a.instance.as_str())
    }

    fn advertises(&self, action: &str) -> bool {
        self.capabilities.iter().any(|c| c.action == action)
    }
}

#[derive(Debug, Clone)]
pub struct World {
    clock: SimClock,
    map: Option<WorldMap>,
    robots: BTreeMap<String, MockRobot>,
    reserve: BTreeMap<String, MockRobotConfig>,
    next_id: BTreeMap<String, u64>,
}

impl World {
    /// When a map is given, robots must start in free cells.
    pub fn new(map: Option<WorldMap>, mode: ClockMode) -> Self {
        World {
            clock: SimClock::new(mode),
            map,
            robots: BTreeMap::new(),
            reserve: BTreeMap::new(),
            next_id: BTreeMap::new(),
        }
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn robot(&self, name: &str) -> Option<&MockRobot> {
        self.robots.get(name)
    }

    pub fn robots(&self) -> impl Iterator<Item = &MockRobot> {
        self.robots.values()
    }

    /// Spawns every non-reserve robot; each advertises and reports its pose.
    pub fn spawn_pool(&mut self, configs: Vec<MockRobotConfig>) -> Result<Vec<Message>, SimError> {
        let mut names = std::collections::BTreeSet::new();
        for c in &configs {
            if !names.insert(c.name.clone()) || self.robots.contains_key(&c.name) {
                return Err(PoolError::DuplicateName(c.name.clone()).into());
            }
            self.check_pose(c)?;
        }
        let mut out = Vec::new();
        for c in configs {
            if c.reserve {
                self.reserve.insert(c.name.clone(), c);
            } else {
                out.extend(self.spawn(c)?);
            }
        }
        Ok(out)
    }

    fn check_pose(&self, c: &MockRobotConfig) -> Result<(), PoolError> {
        match &self.map {
            Some(m) if !m.point_is_free(Point::from(c.pose)) => {
                Err(PoolError::PoseOccupied(c.name.clone()))
            }
            _ => Ok(()),
        }
    }

    pub fn spawn(&mut self, config: MockRobotConfig) -> Result<Vec<Message>, SimError> {
        if self.robots.contains_key(&config.name) {
            return Err(PoolError::DuplicateName(config.name).into());
        }
        self.check_pose(&config)?;
        let name = config.name.clone();
        let robot = MockRobot::new(config);
        let advertise = Body::Advertise {
            robot: name.clone(),
            capabilities: robot.capabilities.clone(),
            properties: robot.properties.clone(),
        };
        let pose = pose_update(&robot);
        self.robots.insert(name.clone(), robot);
        info!("robot {name} spawned");
        Ok(vec![self.msg(&name, advertise), self.msg(&name, pose)])
    }

    fn msg(&mut self, sender: &str, body: Body) -> Message {
        let id = self.next_id.entry(sender.to_string()).or_insert(0);
        *id += 1;
        Message::new(*id, sender, self.clock.now_ms(), body)
    }

    fn status(&mut self, robot: &str, instance: &str, status: StatusKind, detail: Option<String>) -> Message {
        let body = Body::ActionStatus {
            instance: instance.to_string(),
            status,
            detail,
        };
        self.msg(robot, body)
    }

    /// Reacts to `START_ACTION` and `CANCEL_ACTION`; other bodies are ignored.
    pub fn handle(&mut self, body: &Body) -> Vec<Message> {
        match body {
            Body::StartAction {
                instance,
                action,
                args,
                robot,
            } => self.start(robot, instance, action, args),
            Body::CancelAction { instance } => self.cancel(instance),
            _ => Vec::new(),
        }
    }

    fn start(&mut self, name: &str, instance: &str, action: &str, args: &[Value]) -> Vec<Message> {
        let Some(robot) = self.robots.get(name) else {
            warn!("start of {instance} on unknown robot {name}");
            return Vec::new();
        };
        let refuse = if robot.current.is_some() {
            Some(format!("{name} is busy"))
        } else if !robot.advertises(action) {
            Some(format!("{name} does not advertise {action}"))
        } else {
            None
        };
        let work = match (action, refuse) {
            (_, Some(reason)) => Err(reason),
            ("goto", None) => match args {
                [x, y] => match (number(x), number(y)) {
                    (Some(x), Some(y)) => Ok(Work::Drive {
                        to: Point::new(x, y),
                    }),
                    _ => Err("goto expects x and y".to_string()),
                },
                _ => Err("goto expects x and y".to_string()),
            },
            (action, None) => Ok(match robot.config.script_for(action) {
                ActionScript::Succeed { duration_ms } if action == "twist" => Work::Twist {
                    remaining_ms: duration_ms as i64,
                },
                ActionScript::Succeed { duration_ms } => Work::Timed {
                    remaining_ms: duration_ms as i64,
                    fail: false,
                },
                ActionScript::Fail { after_ms } => Work::Timed {
                    remaining_ms: after_ms as i64,
                    fail: true,
                },
                ActionScript::Hold => Work::Hold,
            }),
        };
        match work {
            Ok(work) => {
                self.robots.get_mut(name).expect("checked").current = Some(Activity {
                    instance: instance.to_string(),
                    work,
                });
                vec![self.status(name, instance, StatusKind::Accepted, None)]
            }
            Err(reason) => vec![self.status(name, instance, StatusKind::Failed, Some(reason))],
        }
    }

    fn cancel(&mut self, instance: &str) -> Vec<Message> {
        let owner = self
            .robots
            .values_mut()
            .find(|r| r.current() == Some(instance));
        let Some(robot) = owner else {
            return Vec::new();
        };
        robot.current = None;
        let name = robot.config.name.clone();
        vec![self.status(&name, instance, StatusKind::Terminated, None)]
    }

    /// Advances simulated time by `dt_ms`, robots in name order.
    pub fn step(&mut self, dt_ms: u64) -> Vec<Message> {
        if dt_ms == 0 {
            return Vec::new();
        }
        let before = self.clock.now_ms();
        let now = self.clock.advance(dt_ms);
        let periodic = before / POSE_PERIOD_MS != now / POSE_PERIOD_MS;
        let names: Vec<String> = self.robots.keys().cloned().collect();
        let mut out = Vec::new();
        for name in names {
            let robot = self.robots.get_mut(&name).expect("listed");
            let mut moved = false;
            let mut done = None;
            if let Some(act) = &mut robot.current {
                match &mut act.work {
                    Work::Drive { to } => {
                        let here = Point::from(robot.pose);
                        let left = here.distance(*to);
                        let reach = robot.config.speed * dt_ms as f64 / 1000.0;
                        let (next, d) = if left <= reach {
                            (*to, left)
                        } else {
                            (here.lerp(*to, reach / left), reach)
                        };
                        if d > 0.0 {
                            robot.pose.theta = (to.y - here.y).atan2(to.x - here.x);
                        }
                        robot.pose.x = next.x;
                        robot.pose.y = next.y;
                        robot.odometer += d;
                        robot.battery = (robot.battery - robot.config.drain_per_meter * d).max(0.0);
                        moved = true;
                        if left <= reach {
                            done = Some((StatusKind::Succeeded, None));
                        }
                    }
                    Work::Timed { remaining_ms, fail } => {
                        *remaining_ms -= dt_ms as i64;
                        if *remaining_ms <= 0 {
                            done = Some(if *fail {
                                (StatusKind::Failed, Some("scripted failure".to_string()))
                            } else {
                                (StatusKind::Succeeded, None)
                            });
                        }
                    }
                    Work::Twist { remaining_ms } => {
                        let spin = (*remaining_ms).min(dt_ms as i64) as f64 / 1000.0;
                        robot.pose.theta = wrap(robot.pose.theta + TWIST_RATE * spin);
                        *remaining_ms -= dt_ms as i64;
                        moved = true;
                        if *remaining_ms <= 0 {
                            done = Some((StatusKind::Succeeded, None));
                        }
                    }
                    Work::Hold => {}
                }
            }
            let instance = if done.is_some() {
                robot.current.take().map(|a| a.instance)
            } else {
                None
            };
            let pose = (moved || periodic).then(|| pose_update(robot));
            if let Some(p) = pose {
                out.push(self.msg(&name, p));
            }
            if let (Some(instance), Some((status, detail))) = (instance, done) {
                out.push(self.status(&name, &instance, status, detail));
            }
        }
        out
    }

    /// Applies an outside change and returns what the agents report.
    pub fn inject(&mut self, m: Mutation) -> Result<Vec<Message>, SimError> {
        let known = |w: &World, r: &str| {
            if w.robots.contains_key(r) {
                Ok(())
            } else {
                Err(SimError::UnknownRobot(r.to_string()))
            }
        };
        match m {
            Mutation::SetProperty { robot, prop, value } => {
                known(self, &robot)?;
                let r = self.robots.get_mut(&robot).expect("checked");
                r.properties.insert(prop.clone(), value.clone());
                let body = Body::PropertyUpdate {
                    robot: robot.clone(),
                    prop,
                    value,
                };
                Ok(vec![self.msg(&robot, body)])
            }
            Mutation::FireEvent { name, args } => {
                let body = Body::Event { name, args };
                Ok(vec![self.msg(INJECT_SENDER, body)])
            }
            Mutation::RetractCapability { robot, action } => {
                known(self, &robot)?;
                let r = self.robots.get_mut(&robot).expect("checked");
                r.capabilities.retain(|c| c.action != action);
                let body = Body::Retract {
                    robot: robot.clone(),
                    action,
                };
                Ok(vec![self.msg(&robot, body)])
            }
            Mutation::RemoveRobot { robot } => {
                known(self, &robot)?;
                self.robots.remove(&robot);
                info!("robot {robot} removed");
                let body = Body::Leave {
                    robot: robot.clone(),
                };
                Ok(vec![self.msg(&robot, body)])
            }
            Mutation::SpawnRobot { robot } => {
                let mut config = self
                    .reserve
                    .remove(&robot)
                    .ok_or(SimError::UnknownReserve(robot))?;
                config.reserve = false;
                self.spawn(config)
            }
            Mutation::Nudge { robot, dx, dy } => {
                known(self, &robot)?;
                let r = self.robots.get_mut(&robot).expect("checked");
                r.pose.x += dx;
                r.pose.y += dy;
                let body = pose_update(r);
                Ok(vec![self.msg(&robot, body)])
            }
        }
    }
}

fn pose_update(r: &MockRobot) -> Body {
    Body::PoseUpdate {
        robot: r.config.name.clone(),
        pose: r.pose,
        battery: r.battery,
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Int(i) => Some(*i as f64),
        _ => None,
    }
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(std::f64::consts::TAU);
    if t > std::f64::consts::PI {
        t - std::f64::consts::TAU
    } else {
        t
    }
}
