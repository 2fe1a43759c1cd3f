//! The interpreter loop for one pool: the temporal engine, the optimizer,
//! the path planner and the simulated robots, advanced together in fixed
//! steps of simulated time.
//!
//! Everything the runtime exchanges with the robots is kept as protocol
//! messages in [`Runtime::wire`]; the engine's trace is the run's record.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use log::{debug, error, warn};
use resh_engine::{Command, EngineError, GotoRequest, RuntimeEvent, TaskInfo, TemporalEngine};
use resh_lang::{compile, ActionSig, CompileError, ParamType, SourceProgram, TypedProgram};
use resh_optimize::{
    solve, validate, RobotDescriptor, StraightLine, Target, TravelEstimator,
};
use resh_path::{
    estimate, plan, shortest_path, Conformance, ConformanceTracker, DispatchOut, Dispatcher,
    PathProblem, PathRequest, PlannerConfig, Point, WorldMap,
};
use resh_protocol::{
    Body, Capability, Deduplicator, GotoEntry, Message, Pose, StatusKind, Value, Waypoint,
    PROTOCOL_VERSION,
};
use resh_sim::{ClockMode, MockRobotConfig, Mutation, SimError, World};
use thiserror::Error;

use crate::inject::{InjectAction, InjectLine, InjectScript, RobotRef};

/// Sender of every message the runtime originates.
pub const RUNTIME_SENDER: &str = "runtime";

/// Optimization rounds allowed per step before the rest waits a step.
const MAX_ROUNDS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeConfig {
    pub planner: PlannerConfig,
    /// Lateral tolerance of conformance tracking, meters.
    pub epsilon: f64,
    /// Simulated milliseconds per step.
    pub step_ms: u64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            planner: PlannerConfig::default(),
            epsilon: 0.5,
            step_ms: 100,
        }
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot resolve robot {0}")]
    UnboundRobot(String),
}

/// Shortest-path travel time on the map; unreachable targets rule the
/// pairing out.
pub struct MapEstimator<'a>(pub &'a WorldMap);

impl TravelEstimator for MapEstimator<'_> {
    fn travel_seconds(&self, robot: &RobotDescriptor, target: &Target) -> Option<f64> {
        estimate(self.0, robot.origin().into(), target.pose.into(), robot.speed)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Movement {
    goto: String,
    goal: Pose,
}

/// How a [`Runtime::run`] ended.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Every task reached a terminal state.
    pub finished: bool,
    /// Every task succeeded.
    pub succeeded: bool,
    pub sim_ms: u64,
}

pub struct Runtime {
    cfg: RuntimeConfig,
    engine: TemporalEngine,
    world: World,
    map: Option<WorldMap>,
    dispatcher: Dispatcher,
    tracker: ConformanceTracker,
    /// Robot to the movement it is making.
    moving: BTreeMap<String, Movement>,
    /// Timer to due time.
    timers: BTreeMap<String, u64>,
    inbox: VecDeque<Message>,
    seen: Deduplicator,
    wire: Vec<Message>,
    next_id: u64,
    next_program: u64,
}

impl Runtime {
    /// Spawns the pool's non-reserve robots into a fresh world.
    pub fn new(
        map: Option<WorldMap>,
        pool: Vec<MockRobotConfig>,
        clock: ClockMode,
        cfg: RuntimeConfig,
    ) -> Result<Self, SimError> {
        let locations = map
            .as_ref()
            .map(|m| m.locations.clone())
            .unwrap_or_default();
        let mut rt = Runtime {
            cfg,
            engine: TemporalEngine::new(locations),
            world: World::new(map.clone(), clock),
            map,
            dispatcher: Dispatcher::default(),
            tracker: ConformanceTracker::new(cfg.epsilon),
            moving: BTreeMap::new(),
            timers: BTreeMap::new(),
            inbox: VecDeque::new(),
            seen: Deduplicator::default(),
            wire: Vec::new(),
            next_id: 0,
            next_program: 0,
        };
        let msgs = rt.world.spawn_pool(pool)?;
        rt.inbox.extend(msgs);
        rt.settle();
        Ok(rt)
    }

    pub fn now(&self) -> u64 {
        self.world.now_ms()
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.cfg
    }

    pub fn engine(&self) -> &TemporalEngine {
        &self.engine
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn map(&self) -> Option<&WorldMap> {
        self.map.as_ref()
    }

    /// Every protocol message exchanged with the robots so far.
    pub fn wire(&self) -> &[Message] {
        &self.wire
    }

    pub fn status(&self, program_id: &str) -> Option<TaskInfo> {
        self.engine.task(program_id)
    }

    pub fn tasks(&self) -> Vec<TaskInfo> {
        self.engine.tasks()
    }

    /// The trace file: one tab-separated record per line.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for r in self.engine.trace() {
            let _ = writeln!(out, "{r}");
        }
        out
    }

    /// Only the `LETTER` records: the timing diagram of every task.
    pub fn letters_text(&self) -> String {
        let mut out = String::new();
        for r in self.engine.trace().iter().filter(|r| r.kind == "LETTER") {
            let _ = writeln!(out, "{r}");
        }
        out
    }

    /// Compiles and submits. Without an id, one is generated.
    pub fn submit(
        &mut self,
        source: &SourceProgram,
        program_id: Option<&str>,
    ) -> Result<String, RuntimeError> {
        let program = compile(source)?;
        self.submit_program(program_id, program)
    }

    pub fn submit_program(
        &mut self,
        program_id: Option<&str>,
        program: TypedProgram,
    ) -> Result<String, RuntimeError> {
        let id = match program_id {
            Some(id) => id.to_string(),
            None => loop {
                self.next_program += 1;
                let id = format!("p{}", self.next_program);
                if self.engine.task(&id).is_none() {
                    break id;
                }
            },
        };
        let now = self.now();
        let cmds = self.engine.submit(&id, program, now)?;
        self.execute(cmds);
        self.settle();
        Ok(id)
    }

    pub fn cancel(&mut self, program_id: &str) -> Result<(), EngineError> {
        let now = self.now();
        let cmds = self.engine.cancel_task(program_id, now)?;
        self.execute(cmds);
        self.settle();
        Ok(())
    }

    /// Applies a world mutation as if made from outside.
    pub fn inject(&mut self, m: Mutation) -> Result<(), SimError> {
        let msgs = self.world.inject(m)?;
        self.inbox.extend(msgs);
        self.settle();
        Ok(())
    }

    /// The robot a script reference names right now.
    pub fn resolve(&self, r: &RobotRef) -> Option<String> {
        match r {
            RobotRef::Name(n) => Some(n.clone()),
            RobotRef::Var { program, var } => {
                let program = match program {
                    Some(p) => p.clone(),
                    None => self.engine.tasks().first()?.program_id.clone(),
                };
                self.engine.bindings().get(&format!("{program}:{var}")).cloned()
            }
        }
    }

    /// Carries out one script line.
    pub fn apply(&mut self, action: &InjectAction) -> Result<(), RuntimeError> {
        let robot = |rt: &Self, r: &RobotRef| {
            rt.resolve(r).ok_or_else(|| {
                RuntimeError::UnboundRobot(match r {
                    RobotRef::Name(n) => n.clone(),
                    RobotRef::Var { program, var } => {
                        format!("{}:{var}", program.as_deref().unwrap_or(""))
                    }
                })
            })
        };
        let m = match action {
            InjectAction::Set { robot: r, prop, value } => Mutation::SetProperty {
                robot: robot(self, r)?,
                prop: prop.clone(),
                value: value.clone(),
            },
            InjectAction::Event { name, args } => Mutation::FireEvent {
                name: name.clone(),
                args: args.clone(),
            },
            InjectAction::Retract { robot: r, action } => Mutation::RetractCapability {
                robot: robot(self, r)?,
                action: action.clone(),
            },
            InjectAction::Remove { robot: r } => Mutation::RemoveRobot {
                robot: robot(self, r)?,
            },
            InjectAction::Spawn { robot } => Mutation::SpawnRobot {
                robot: robot.clone(),
            },
            InjectAction::Nudge { robot: r, dx, dy } => Mutation::Nudge {
                robot: robot(self, r)?,
                dx: *dx,
                dy: *dy,
            },
        };
        Ok(self.inject(m)?)
    }

    /// Advances simulated time by one step.
    pub fn step(&mut self) {
        let msgs = self.world.step(self.cfg.step_ms);
        self.inbox.extend(msgs);
        self.pump();
        let now = self.now();
        let due: Vec<String> = self
            .timers
            .iter()
            .filter(|(_, &at)| at <= now)
            .map(|(t, _)| t.clone())
            .collect();
        for t in due {
            self.timers.remove(&t);
            let cmds = self.engine.on_event(RuntimeEvent::TimerFired(t), now);
            self.execute(cmds);
        }
        let outs = self.dispatcher.poll(now);
        self.dispatch(outs);
        self.settle();
    }

    /// Steps until every task is terminal or `max_ms` of simulated time
    /// has passed, firing script lines when their time comes. Script lines
    /// that cannot be applied are logged and skipped.
    pub fn run(&mut self, script: &InjectScript, max_ms: u64) -> RunSummary {
        let mut pending: VecDeque<&InjectLine> = script.lines.iter().collect();
        loop {
            while pending.front().is_some_and(|l| l.at_ms <= self.now()) {
                let l = pending.pop_front().expect("checked");
                if let Err(e) = self.apply(&l.action) {
                    warn!("inject line {}: {e}", l.line);
                    let now = self.now();
                    self.engine.note(format!("inject line {} skipped: {e}", l.line), now);
                    self.settle();
                }
            }
            if self.engine.all_done() || self.now() >= max_ms {
                break;
            }
            if let Some(wait) = self.world.clock().wall_time(self.cfg.step_ms) {
                std::thread::sleep(wait);
            }
            self.step();
        }
        let tasks = self.engine.tasks();
        RunSummary {
            finished: self.engine.all_done(),
            succeeded: self.engine.all_done()
                && tasks
                    .iter()
                    .all(|t| t.state == resh_protocol::TaskState::Succeeded),
            sim_ms: self.now(),
        }
    }

    fn pump(&mut self) {
        while let Some(m) = self.inbox.pop_front() {
            self.wire.push(m.clone());
            self.receive(m);
        }
    }

    /// Drains messages and runs optimization rounds until quiet.
    fn settle(&mut self) {
        for _ in 0..MAX_ROUNDS {
            self.pump();
            if !self.engine.is_dirty() {
                return;
            }
            self.decide();
        }
        self.pump();
    }

    fn decide(&mut self) {
        let now = self.now();
        let Some(problem) = self.engine.formulate(now) else {
            return;
        };
        let geo: &dyn TravelEstimator = match &self.map {
            Some(m) => &MapEstimator(m),
            None => &StraightLine,
        };
        let sol = solve(&problem, geo);
        if let Err(e) = validate(&problem, &sol, geo) {
            error!("epoch {} solution rejected: {e}", problem.epoch);
            return;
        }
        match self.engine.apply_solution(&sol, now) {
            Ok(cmds) => self.execute(cmds),
            Err(e) => warn!("{e}"),
        }
    }

    /// Wraps a body in a message from the runtime without logging it.
    pub fn message(&mut self, body: Body) -> Message {
        self.next_id += 1;
        Message::new(self.next_id, RUNTIME_SENDER, self.now(), body)
    }

    /// Sends a command to the robots and queues their replies.
    fn send(&mut self, body: Body) {
        let m = self.message(body);
        self.wire.push(m.clone());
        let replies = self.world.handle(&m.body);
        self.inbox.extend(replies);
    }

    /// Logs a message that no robot acts on.
    fn announce(&mut self, body: Body) {
        let m = self.message(body);
        self.wire.push(m);
    }

    fn engine_event(&mut self, ev: RuntimeEvent) {
        let now = self.now();
        let cmds = self.engine.on_event(ev, now);
        self.execute(cmds);
    }

    /// Handles a message as if a robot had sent it.
    pub fn deliver(&mut self, m: Message) {
        self.inbox.push_back(m);
        self.settle();
    }

    fn receive(&mut self, m: Message) {
        if !self.seen.first_delivery(&m) {
            debug!("duplicate {} {} from {}", m.body.kind(), m.id, m.sender);
            return;
        }
        if m.v != PROTOCOL_VERSION {
            warn!("refusing {} from {}: protocol version {}", m.body.kind(), m.sender, m.v);
            return;
        }
        match m.body {
            Body::Advertise {
                robot,
                capabilities,
                properties,
            } => {
                if self.engine.pool().contains_key(&robot) {
                    for capability in capabilities {
                        self.engine_event(RuntimeEvent::CapabilityAdvertised {
                            robot: robot.clone(),
                            capability,
                        });
                    }
                    return;
                }
                let mut d = RobotDescriptor::new(robot.clone(), Pose::default());
                if let Some(r) = self.world.robot(&robot) {
                    d.pose = r.pose;
                    d.speed = r.config.speed;
                    d.battery = r.battery;
                }
                d.capabilities = capabilities;
                d.properties = properties;
                self.engine_event(RuntimeEvent::RobotAdded(d));
            }
            Body::Retract { robot, action } => {
                self.engine_event(RuntimeEvent::CapabilityRetracted { robot, action })
            }
            Body::PropertyUpdate { robot, prop, value } => {
                self.engine_event(RuntimeEvent::PropertyChanged { robot, prop, value })
            }
            Body::PoseUpdate {
                robot,
                pose,
                battery,
            } => {
                if let Conformance::Abort { deviation } = self.tracker.track(&robot, pose.into()) {
                    self.engine_event(RuntimeEvent::PoseChanged {
                        robot: robot.clone(),
                        pose,
                        battery,
                    });
                    self.replan(&robot, deviation);
                } else {
                    self.engine_event(RuntimeEvent::PoseChanged {
                        robot,
                        pose,
                        battery,
                    });
                }
            }
            Body::ActionStatus {
                instance, status, ..
            } => {
                if self.dispatcher.owns(&instance) {
                    let outs = self.dispatcher.on_status(&instance, status, self.now());
                    self.dispatch(outs);
                } else if is_leg(&instance) {
                    debug!("late status {status:?} for leg {instance}");
                } else if status.is_terminal() {
                    self.engine_event(RuntimeEvent::ActionFinished { instance, status });
                }
            }
            Body::Event { name, args } => {
                self.engine_event(RuntimeEvent::ExternalEvent { name, args })
            }
            Body::Leave { robot } => {
                self.dispatcher.cancel(&robot);
                self.moving.remove(&robot);
                self.tracker.clear(&robot);
                self.engine_event(RuntimeEvent::RobotRemoved(robot));
            }
            other => debug!("ignoring {} from {}", other.kind(), m.sender),
        }
    }

    fn execute(&mut self, cmds: Vec<Command>) {
        for c in cmds {
            match c {
                Command::StartAction {
                    instance,
                    action,
                    args,
                    robot,
                } => self.send(Body::StartAction {
                    instance,
                    action,
                    args,
                    robot,
                }),
                Command::CancelAction { instance } if instance.ends_with(".goto") => {
                    let robot = self
                        .moving
                        .iter()
                        .find(|(_, mv)| mv.goto == instance)
                        .map(|(r, _)| r.clone());
                    if let Some(robot) = robot {
                        self.stop(&robot);
                    }
                    self.engine_event(RuntimeEvent::ActionFinished {
                        instance,
                        status: StatusKind::Terminated,
                    });
                }
                Command::CancelAction { instance } => self.send(Body::CancelAction { instance }),
                Command::GotoSet { epoch, gotos } => self.goto_set(epoch, gotos),
                Command::StartTimer { timer, delay_ms } => {
                    let at = self.now() + delay_ms;
                    self.timers.insert(timer, at);
                }
                Command::CancelTimer { timer } => {
                    self.timers.remove(&timer);
                }
                Command::TaskStatus {
                    program_id,
                    state,
                    detail,
                } => self.announce(Body::TaskStatus {
                    program_id,
                    state,
                    detail,
                }),
            }
        }
    }

    /// Halts a robot's movement and forgets it.
    fn stop(&mut self, robot: &str) {
        let outs = self.dispatcher.cancel(robot);
        self.dispatch(outs);
        self.moving.remove(robot);
        self.tracker.clear(robot);
    }

    fn pose_of(&self, robot: &str) -> Pose {
        self.engine
            .pool()
            .get(robot)
            .map(|r| r.pose)
            .unwrap_or_default()
    }

    fn request(&self, robot: &str, goal: Pose) -> PathRequest {
        PathRequest {
            robot: robot.to_string(),
            start: self.pose_of(robot),
            goal,
            speed: self.engine.pool().get(robot).map_or(1.0, |r| r.speed),
        }
    }

    /// Waypoints per requested robot, or why it cannot move.
    fn plan_paths(&self, requests: &[PathRequest]) -> BTreeMap<String, Result<Vec<Waypoint>, String>> {
        let wp = |p: Point| Waypoint {
            x: p.x,
            y: p.y,
            delay_s: 0.0,
        };
        let Some(map) = &self.map else {
            return requests
                .iter()
                .map(|r| (r.robot.clone(), Ok(vec![wp(r.goal.into())])))
                .collect();
        };
        let parked = self
            .engine
            .pool()
            .values()
            .filter(|r| requests.iter().all(|q| q.robot != r.name))
            .map(|r| (r.name.clone(), r.pose))
            .collect();
        let problem = PathProblem {
            requests: requests.to_vec(),
            parked,
        };
        match plan(map, &problem, &self.cfg.planner) {
            Ok(sol) => sol
                .plans
                .into_iter()
                .map(|(r, p)| (r, Ok(p.waypoints)))
                .collect(),
            Err(e) => {
                warn!("joint path plan failed ({e}); planning robots independently");
                requests
                    .iter()
                    .map(|r| {
                        let path = shortest_path(map, r.start.into(), r.goal.into())
                            .map(|pts| pts.into_iter().map(wp).collect())
                            .ok_or_else(|| format!("no path for {}", r.robot));
                        (r.robot.clone(), path)
                    })
                    .collect()
            }
        }
    }

    /// Plans every movement of the epoch together with those already under
    /// way, then hands the legs to the dispatcher.
    fn goto_set(&mut self, epoch: u64, gotos: Vec<GotoRequest>) {
        for g in gotos {
            self.moving.insert(
                g.robot,
                Movement {
                    goto: g.instance,
                    goal: g.goal,
                },
            );
        }
        let requests: Vec<PathRequest> = self
            .moving
            .iter()
            .map(|(r, mv)| self.request(r, mv.goal))
            .collect();
        self.launch(Some(epoch), requests);
    }

    fn launch(&mut self, epoch: Option<u64>, requests: Vec<PathRequest>) {
        let plans = self.plan_paths(&requests);
        let mut entries = Vec::new();
        let mut failed = Vec::new();
        for req in &requests {
            let goto = self.moving[&req.robot].goto.clone();
            match plans.get(&req.robot) {
                Some(Ok(waypoints)) => entries.push((
                    req.start,
                    GotoEntry {
                        robot: req.robot.clone(),
                        instance: goto,
                        waypoints: waypoints.clone(),
                    },
                )),
                Some(Err(detail)) => failed.push((req.robot.clone(), goto, detail.clone())),
                None => failed.push((req.robot.clone(), goto, "not planned".into())),
            }
        }
        if let Some(epoch) = epoch {
            self.announce(Body::GotoSet {
                epoch,
                entries: entries.iter().map(|(_, e)| e.clone()).collect(),
                path_ref: None,
            });
        }
        for (start, entry) in entries {
            let mut route = vec![Point::from(start)];
            route.extend(entry.waypoints.iter().map(|w| Point::new(w.x, w.y)));
            self.tracker.set_route(&entry.robot, route);
            let outs = self.dispatcher.assign(&entry, self.now());
            self.dispatch(outs);
        }
        for (robot, goto, detail) in failed {
            warn!("{goto}: {detail}");
            self.stop(&robot);
            self.engine_event(RuntimeEvent::ActionFinished {
                instance: goto,
                status: StatusKind::Failed,
            });
        }
    }

    /// Re-plans a robot that strayed from its route.
    fn replan(&mut self, robot: &str, deviation: f64) {
        let Some(mv) = self.moving.get(robot).cloned() else {
            return;
        };
        let outs = self.dispatcher.cancel(robot);
        self.dispatch(outs);
        let now = self.now();
        self.engine.note(
            format!("{robot} off route by {deviation:.2} m; replanning {}", mv.goto),
            now,
        );
        let req = self.request(robot, mv.goal);
        self.launch(None, vec![req]);
    }

    fn dispatch(&mut self, outs: Vec<DispatchOut>) {
        for o in outs {
            match o {
                DispatchOut::Send { robot, instance, x, y } => self.send(Body::StartAction {
                    instance,
                    action: "goto".into(),
                    args: vec![Value::Float(x), Value::Float(y)],
                    robot,
                }),
                DispatchOut::Cancel { instance } => self.send(Body::CancelAction { instance }),
                DispatchOut::Arrived { robot, goto } => self.finish_move(&robot, goto, StatusKind::Succeeded),
                DispatchOut::Failed {
                    robot,
                    goto,
                    detail,
                } => {
                    warn!("{goto}: {detail}");
                    self.finish_move(&robot, goto, StatusKind::Failed);
                }
            }
        }
    }

    fn finish_move(&mut self, robot: &str, goto: String, status: StatusKind) {
        if self.moving.get(robot).is_some_and(|mv| mv.goto == goto) {
            self.moving.remove(robot);
            self.tracker.clear(robot);
        }
        self.engine_event(RuntimeEvent::ActionFinished {
            instance: goto,
            status,
        });
    }
}

/// Whether `instance` names one waypoint leg of a goto.
fn is_leg(instance: &str) -> bool {
    instance
        .rsplit_once(".w")
        .is_some_and(|(goto, k)| goto.ends_with(".goto") && k.parse::<usize>().is_ok())
}

/// Mock robots for programs run without a pool file: `n` robots on the x
/// axis advertising every declared action and `goto`.
pub fn default_pool(program: &TypedProgram, n: usize) -> Vec<MockRobotConfig> {
    (0..n)
        .map(|i| {
            let mut r = MockRobotConfig::new(format!("r{i}"), Pose::new(2.0 * i as f64 + 0.5, 0.5, 0.0));
            for (name, sig) in &program.actions {
                r = r.with_capability(Capability::new(name.clone(), sig.clone()));
            }
            let goto = ActionSig::goto();
            if !program.actions.contains_key(&goto.name) {
                r = r.with_capability(Capability::new(goto.name, vec![ParamType::Loc]));
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legs_are_recognized() {
        assert!(is_leg("p.f0.a1.goto.w0"));
        assert!(is_leg("p.f0.a1.goto.w12"));
        assert!(!is_leg("p.f0.a1.goto"));
        assert!(!is_leg("p.f0.a1"));
        assert!(!is_leg("p.f0.a1.goto.wx"));
    }
}
