//! Prioritized multi-robot planning in space and time.
//!
//! Robots are planned one at a time, longest reference path first. Each
//! robot first tries its own shortest path, then a space-time A* over the
//! grid that may wait in place, then its shortest path with a departure
//! delay. The result is simplified to line-of-sight waypoints carrying the
//! waits as delays. When an order fails, other orders are tried.

use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::cmp::Ordering;

use log::debug;
use resh_protocol::{Pose, Waypoint};
use thiserror::Error;

use crate::astar::{neighbors, path_length, shortest_path};
use crate::map::{Cell, Point, WorldMap};
use crate::trajectory::{min_separation, Trajectory};

/// Sampling period for separation checks, seconds.
pub const SAMPLE_DT: f64 = 0.05;
/// Length of one wait move in the space-time search, seconds.
pub const WAIT_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub robot_radius: f64,
    /// Bound on planned length over reference length.
    pub stretch_limit: f64,
    /// Search nodes per robot before giving up on the space-time search.
    pub max_expansions: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            robot_radius: 0.2,
            stretch_limit: 1.5,
            max_expansions: 60_000,
        }
    }
}

impl PlannerConfig {
    /// Minimum allowed center distance between two robots.
    pub fn d_min(&self) -> f64 {
        2.0 * self.robot_radius + 0.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRequest {
    pub robot: String,
    pub start: Pose,
    pub goal: Pose,
    /// Meters per second.
    pub speed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathProblem {
    pub requests: Vec<PathRequest>,
    /// Robots that stay where they are.
    pub parked: Vec<(String, Pose)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotPlan {
    /// Starts at the robot's start and ends at its goal.
    pub waypoints: Vec<Waypoint>,
    /// Length of the robot's single-robot shortest path.
    pub reference_length: f64,
    pub length: f64,
    /// Seconds until the robot stops at its goal.
    pub arrival_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultipathSolution {
    pub plans: BTreeMap<String, RobotPlan>,
    /// Priority order that produced the plan.
    pub order: Vec<String>,
}

impl MultipathSolution {
    pub fn trajectory(&self, req: &PathRequest) -> Option<Trajectory> {
        let p = self.plans.get(&req.robot)?;
        Some(Trajectory::follow(req.start.into(), &p.waypoints, req.speed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("no path for {0}")]
    NoPath(String),
    #[error("start or goal of {0} is outside the free space")]
    OffMap(String),
    #[error("speed of {0} must be positive")]
    BadSpeed(String),
    #[error("no priority order yields a separated plan")]
    NoJointPlan,
}

fn to_waypoints(pts: &[Point]) -> Vec<Waypoint> {
    pts.iter()
        .map(|p| Waypoint {
            x: p.x,
            y: p.y,
            delay_s: 0.0,
        })
        .collect()
}

fn point(w: &Waypoint) -> Point {
    Point::new(w.x, w.y)
}

/// Drops interior waypoint `k`. Its delay is added to the next waypoint's.
pub fn remove_waypoint(wps: &[Waypoint], k: usize) -> Vec<Waypoint> {
    let mut out = wps.to_vec();
    let d = out[k].delay_s;
    out[k + 1].delay_s += d;
    out.remove(k);
    out
}

fn separated(t: &Trajectory, reserved: &[Trajectory], d_min: f64) -> bool {
    reserved
        .iter()
        .all(|r| min_separation(t, r, SAMPLE_DT) >= d_min)
}

/// Removes interior waypoints while sight lines and separation hold.
fn thin(
    map: &WorldMap,
    start: Point,
    speed: f64,
    mut wps: Vec<Waypoint>,
    reserved: &[Trajectory],
    d_min: f64,
) -> Vec<Waypoint> {
    'outer: loop {
        for k in 1..wps.len().saturating_sub(1) {
            if !map.line_of_sight(point(&wps[k - 1]), point(&wps[k + 1])) {
                continue;
            }
            let cand = remove_waypoint(&wps, k);
            if separated(&Trajectory::follow(start, &cand, speed), reserved, d_min) {
                wps = cand;
                continue 'outer;
            }
        }
        return wps;
    }
}

struct Node {
    cell: Cell,
    t: f64,
    len: f64,
    parent: Option<usize>,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Search<'a> {
    map: &'a WorldMap,
    start: Point,
    goal: Point,
    speed: f64,
    reserved: &'a [Trajectory],
    d_min: f64,
}

impl Search<'_> {
    fn pos(&self, c: Cell) -> Point {
        if c == self.map.cell_of(self.goal) {
            self.goal
        } else if c == self.map.cell_of(self.start) {
            self.start
        } else {
            self.map.center(c)
        }
    }

    fn motion_clear(&self, from: Point, to: Point, t0: f64, t1: f64) -> bool {
        let steps = ((t1 - t0) / SAMPLE_DT).ceil().max(1.0) as usize;
        (0..=steps).all(|k| {
            let s = k as f64 / steps as f64;
            let t = t0 + (t1 - t0) * s;
            let p = from.lerp(to, s);
            self.reserved
                .iter()
                .all(|r| r.at(t).distance(p) >= self.d_min)
        })
    }

    fn can_park(&self, t: f64) -> bool {
        let horizon = self
            .reserved
            .iter()
            .map(Trajectory::end_time)
            .fold(t, f64::max)
            + SAMPLE_DT;
        self.motion_clear(self.goal, self.goal, t, horizon)
    }

    /// Timed cell sequence as waypoints, with waits folded into delays.
    fn run(&self, max_len: f64, max_expansions: usize) -> Option<Vec<Waypoint>> {
        let goal_cell = self.map.cell_of(self.goal);
        let horizon = self
            .reserved
            .iter()
            .map(Trajectory::end_time)
            .fold(0.0, f64::max)
            + max_len / self.speed
            + 30.0;
        let mut nodes = vec![Node {
            cell: self.map.cell_of(self.start),
            t: 0.0,
            len: 0.0,
            parent: None,
        }];
        if !self.motion_clear(self.start, self.start, 0.0, 0.0) {
            return None;
        }
        let mut open = BinaryHeap::from([Open {
            f: self.start.distance(self.goal) / self.speed,
            idx: 0,
        }]);
        let mut closed: HashMap<(Cell, i64), ()> = HashMap::new();
        let mut expansions = 0;
        while let Some(Open { idx, .. }) = open.pop() {
            let (cell, t, len) = (nodes[idx].cell, nodes[idx].t, nodes[idx].len);
            if closed
                .insert((cell, (t / 0.1).round() as i64), ())
                .is_some()
            {
                continue;
            }
            expansions += 1;
            if expansions > max_expansions {
                debug!("space-time search gave up after {max_expansions} nodes");
                return None;
            }
            if cell == goal_cell && self.can_park(t) {
                return Some(self.unwind(&nodes, idx));
            }
            let here = self.pos(cell);
            let mut succ = vec![(cell, WAIT_STEP, 0.0)];
            for (n, _) in neighbors(self.map, cell) {
                let d = here.distance(self.pos(n));
                succ.push((n, d / self.speed, d));
            }
            for (n, dur, d) in succ {
                let (nt, nlen) = (t + dur, len + d);
                let to = self.pos(n);
                if nt > horizon || nlen + to.distance(self.goal) > max_len {
                    continue;
                }
                if !self.motion_clear(here, to, t, nt) {
                    continue;
                }
                nodes.push(Node {
                    cell: n,
                    t: nt,
                    len: nlen,
                    parent: Some(idx),
                });
                open.push(Open {
                    f: nt + to.distance(self.goal) / self.speed,
                    idx: nodes.len() - 1,
                });
            }
        }
        None
    }

    fn unwind(&self, nodes: &[Node], mut idx: usize) -> Vec<Waypoint> {
        let mut chain = vec![idx];
        while let Some(p) = nodes[idx].parent {
            chain.push(p);
            idx = p;
        }
        chain.reverse();
        let mut wps = vec![Waypoint {
            x: self.start.x,
            y: self.start.y,
            delay_s: 0.0,
        }];
        let mut wait = 0.0;
        for w in chain.windows(2) {
            let (a, b) = (&nodes[w[0]], &nodes[w[1]]);
            if a.cell == b.cell {
                wait += b.t - a.t;
            } else {
                let p = self.pos(b.cell);
                wps.push(Waypoint {
                    x: p.x,
                    y: p.y,
                    delay_s: wait,
                });
                wait = 0.0;
            }
        }
        if wps.len() == 1 {
            wps.push(Waypoint {
                x: self.goal.x,
                y: self.goal.y,
                delay_s: wait,
            });
        }
        wps
    }
}

fn plan_one(
    map: &WorldMap,
    req: &PathRequest,
    reference: &[Point],
    reserved: &[Trajectory],
    cfg: &PlannerConfig,
) -> Option<Vec<Waypoint>> {
    let start: Point = req.start.into();
    let d_min = cfg.d_min();
    let ref_len = path_length(reference);
    let max_len = cfg.stretch_limit * ref_len + 1e-9;
    let mut direct = to_waypoints(reference);
    if direct.len() == 1 {
        direct.push(direct[0]);
    }
    if separated(&Trajectory::follow(start, &direct, req.speed), reserved, d_min) {
        return Some(direct);
    }
    let search = Search {
        map,
        start,
        goal: req.goal.into(),
        speed: req.speed,
        reserved,
        d_min,
    };
    if let Some(wps) = search.run(max_len * 1.1, cfg.max_expansions) {
        let wps = thin(map, start, req.speed, wps, reserved, d_min);
        let len = path_length(&wps.iter().map(point).collect::<Vec<_>>());
        if len <= max_len {
            return Some(wps);
        }
        debug!("{}: searched path too long ({len:.2} > {max_len:.2})", req.robot);
    }
    let latest = reserved.iter().map(Trajectory::end_time).fold(0.0, f64::max);
    let mut delay = WAIT_STEP;
    while delay <= latest + WAIT_STEP {
        let mut wps = direct.clone();
        wps[1].delay_s = delay;
        if separated(&Trajectory::follow(start, &wps, req.speed), reserved, d_min) {
            return Some(wps);
        }
        delay += WAIT_STEP;
    }
    None
}

fn candidate_orders(primary: &[usize]) -> Vec<Vec<usize>> {
    let mut orders = vec![primary.to_vec()];
    for i in 1..primary.len() {
        let mut o = primary.to_vec();
        let r = o.remove(i);
        o.insert(0, r);
        orders.push(o);
    }
    if primary.len() <= 5 {
        let mut perm = primary.to_vec();
        permutations(&mut perm, 0, &mut orders);
    }
    let mut seen = std::collections::HashSet::new();
    orders.retain(|o| seen.insert(o.clone()));
    orders
}

fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, out);
        v.swap(k, i);
    }
}

/// Plans every request against the others and the parked robots.
pub fn plan(
    map: &WorldMap,
    problem: &PathProblem,
    cfg: &PlannerConfig,
) -> Result<MultipathSolution, PathError> {
    let mut references = Vec::new();
    for req in &problem.requests {
        if !(req.speed > 0.0 && req.speed.is_finite()) {
            return Err(PathError::BadSpeed(req.robot.clone()));
        }
        if !map.point_is_free(req.start.into()) || !map.point_is_free(req.goal.into()) {
            return Err(PathError::OffMap(req.robot.clone()));
        }
        let p = shortest_path(map, req.start.into(), req.goal.into())
            .ok_or_else(|| PathError::NoPath(req.robot.clone()))?;
        references.push(p);
    }
    let lengths: Vec<f64> = references.iter().map(|p| path_length(p)).collect();
    let mut primary: Vec<usize> = (0..problem.requests.len()).collect();
    primary.sort_by(|&a, &b| {
        lengths[b]
            .total_cmp(&lengths[a])
            .then_with(|| problem.requests[a].robot.cmp(&problem.requests[b].robot))
    });
    let parked: Vec<Trajectory> = problem
        .parked
        .iter()
        .map(|(_, p)| Trajectory::stationary((*p).into()))
        .collect();
    'orders: for order in candidate_orders(&primary) {
        let mut reserved = parked.clone();
        let mut plans = BTreeMap::new();
        for &i in &order {
            let req = &problem.requests[i];
            let Some(wps) = plan_one(map, req, &references[i], &reserved, cfg) else {
                debug!("order {order:?} failed at {}", req.robot);
                continue 'orders;
            };
            let traj = Trajectory::follow(req.start.into(), &wps, req.speed);
            plans.insert(
                req.robot.clone(),
                RobotPlan {
                    length: traj.length(),
                    arrival_s: traj.end_time(),
                    reference_length: lengths[i],
                    waypoints: wps,
                },
            );
            reserved.push(traj);
        }
        return Ok(MultipathSolution {
            plans,
            order: order
                .iter()
                .map(|&i| problem.requests[i].robot.clone())
                .collect(),
        });
    }
    Err(PathError::NoJointPlan)
}
