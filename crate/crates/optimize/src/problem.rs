//! Assignment instances, their solutions and the shared objective.

use std::collections::{BTreeMap, BTreeSet};

use resh_lang::{ActionSig, PropSpec};
use resh_protocol::{Capability, Pose, Value};

/// Reward for launching one start group, in objective units.
pub const GROUP_REWARD: i64 = 1_000_000_000;
/// Objective units per second of estimated travel.
pub const UNITS_PER_SECOND: f64 = 1000.0;
/// Battery level below which assignments are penalized.
pub const LOW_BATTERY: f64 = 0.2;
/// Penalty seconds per unit of battery below `LOW_BATTERY`.
pub const BATTERY_WEIGHT: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RobotDescriptor {
    pub name: String,
    pub capabilities: Vec<Capability>,
    pub properties: BTreeMap<String, Value>,
    pub pose: Pose,
    /// Nominal speed in meters per second.
    pub speed: f64,
    pub battery: f64,
    /// Action instance the robot is executing.
    pub busy: Option<String>,
    /// Exclusive scope holding the robot.
    pub reserved: Option<String>,
    /// Where the robot was last sent, if it is still moving.
    pub goal: Option<Pose>,
}

impl RobotDescriptor {
    pub fn new(name: impl Into<String>, pose: Pose) -> Self {
        RobotDescriptor {
            name: name.into(),
            capabilities: Vec::new(),
            properties: BTreeMap::new(),
            pose,
            speed: 1.0,
            battery: 1.0,
            busy: None,
            reserved: None,
            goal: None,
        }
    }

    pub fn with_capability(mut self, sig: &ActionSig) -> Self {
        self.capabilities
            .push(Capability::new(sig.name.clone(), sig.signature.clone()));
        self
    }

    pub fn advertises(&self, sig: &ActionSig) -> bool {
        self.capabilities
            .iter()
            .any(|c| c.matches(&sig.name, &sig.signature))
    }

    /// A missing property reads as false.
    pub fn satisfies(&self, spec: &PropSpec) -> bool {
        let v = self
            .properties
            .get(&spec.prop)
            .and_then(Value::as_bool)
            .unwrap_or(false);
        v != spec.negated
    }

    /// Travel is estimated from here.
    pub fn origin(&self) -> Pose {
        self.goal.unwrap_or(self.pose)
    }

    pub fn battery_penalty(&self) -> f64 {
        BATTERY_WEIGHT * (LOW_BATTERY - self.battery).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RobotChoice {
    Any,
    Fixed(String),
    /// A robot variable, by its engine-wide key.
    Var(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRequest {
    pub instance: String,
    pub sig: ActionSig,
    /// Set when the action runs at a location.
    pub target: Option<Target>,
    pub robot: RobotChoice,
    /// Exclusive scopes the action sits in, innermost last.
    pub scopes: Vec<String>,
}

/// Actions that must start together or not at all.
#[derive(Debug, Clone, PartialEq)]
pub struct StartGroup {
    pub task: String,
    pub actions: Vec<ActionRequest>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarSlot {
    pub with: Vec<PropSpec>,
    pub bound: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizationProblem {
    pub epoch: u64,
    /// In task submission order.
    pub groups: Vec<StartGroup>,
    /// Pairs of groups that may not both start.
    pub conflicts: Vec<(usize, usize)>,
    pub vars: BTreeMap<String, VarSlot>,
    pub pool: Vec<RobotDescriptor>,
}

impl OptimizationProblem {
    /// Every distinct action, keyed by instance id.
    pub fn actions(&self) -> BTreeMap<&str, &ActionRequest> {
        self.groups
            .iter()
            .flat_map(|g| &g.actions)
            .map(|a| (a.instance.as_str(), a))
            .collect()
    }

    pub fn robot(&self, name: &str) -> Option<&RobotDescriptor> {
        self.pool.iter().find(|r| r.name == name)
    }

    pub fn in_conflict(&self, a: usize, b: usize) -> bool {
        self.conflicts
            .iter()
            .any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }
}

/// Whether `r` may perform `a`, ignoring geometry and the rest of the
/// solution.
pub fn robot_can_do(o: &OptimizationProblem, a: &ActionRequest, r: &RobotDescriptor) -> bool {
    if r.busy.is_some() || !r.advertises(&a.sig) {
        return false;
    }
    if a.target.is_some() && !r.advertises(&ActionSig::goto()) {
        return false;
    }
    if let Some(scope) = &r.reserved {
        if !a.scopes.contains(scope) {
            return false;
        }
    }
    match &a.robot {
        RobotChoice::Any => true,
        RobotChoice::Fixed(name) => &r.name == name,
        RobotChoice::Var(v) => match o.vars.get(v) {
            Some(VarSlot {
                bound: Some(b), ..
            }) => b == &r.name,
            Some(slot) => slot.with.iter().all(|p| r.satisfies(p)),
            None => false,
        },
    }
}

pub fn feasible_pairs(o: &OptimizationProblem) -> BTreeMap<String, BTreeSet<String>> {
    o.actions()
        .into_iter()
        .map(|(id, a)| {
            let robots = o
                .pool
                .iter()
                .filter(|r| robot_can_do(o, a, r))
                .map(|r| r.name.clone())
                .collect();
            (id.to_string(), robots)
        })
        .collect()
}

/// Seconds from a robot's origin to a target; `None` when unreachable.
pub trait TravelEstimator {
    fn travel_seconds(&self, robot: &RobotDescriptor, target: &Target) -> Option<f64>;
}

/// Straight-line distance at the robot's nominal speed.
#[derive(Debug, Clone, Copy, Default)]
pub struct StraightLine;

impl TravelEstimator for StraightLine {
    fn travel_seconds(&self, robot: &RobotDescriptor, target: &Target) -> Option<f64> {
        Some(robot.origin().distance(&target.pose) / robot.speed)
    }
}

/// Objective cost of giving `a` to `r`; `None` if `r` cannot get there.
pub fn pair_cost(
    a: &ActionRequest,
    r: &RobotDescriptor,
    geo: &dyn TravelEstimator,
) -> Option<i64> {
    let travel = match &a.target {
        Some(t) => geo.travel_seconds(r, t)?,
        None => 0.0,
    };
    Some(((travel + r.battery_penalty()) * UNITS_PER_SECOND).round() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub epoch: u64,
    /// Action instance to robot.
    pub assignments: BTreeMap<String, String>,
    /// Variables bound by this solution.
    pub new_bindings: BTreeMap<String, String>,
    /// Indices into the problem's groups.
    pub selected_groups: Vec<usize>,
    pub objective: i64,
    pub solver: SolverKind,
}

impl Solution {
    pub fn empty(epoch: u64, solver: SolverKind) -> Self {
        Solution {
            epoch,
            assignments: BTreeMap::new(),
            new_bindings: BTreeMap::new(),
            selected_groups: Vec::new(),
            objective: 0,
            solver,
        }
    }
}

/// Objective of a set of groups and assignments; `None` if the
/// assignment is infeasible.
pub fn objective(
    o: &OptimizationProblem,
    groups: &[usize],
    assignments: &BTreeMap<String, String>,
    geo: &dyn TravelEstimator,
) -> Option<i64> {
    let actions = o.actions();
    let mut total = GROUP_REWARD * groups.len() as i64;
    for (id, robot) in assignments {
        let a = actions.get(id.as_str())?;
        let r = o.robot(robot)?;
        total -= pair_cost(a, r, geo)?;
    }
    Some(total)
}

/// Checks every constraint a solution must satisfy.
pub fn validate(
    o: &OptimizationProblem,
    s: &Solution,
    geo: &dyn TravelEstimator,
) -> Result<(), String> {
    let mut covered = BTreeSet::new();
    for (i, &g) in s.selected_groups.iter().enumerate() {
        let group = o.groups.get(g).ok_or("unknown group")?;
        for &h in &s.selected_groups[i + 1..] {
            if o.in_conflict(g, h) {
                return Err(format!("groups {g} and {h} conflict"));
            }
        }
        for a in &group.actions {
            if !covered.insert(a.instance.as_str()) {
                return Err(format!("{} launched twice", a.instance));
            }
            if !s.assignments.contains_key(&a.instance) {
                return Err(format!("{} unassigned", a.instance));
            }
        }
    }
    if covered.len() != s.assignments.len() {
        return Err("assignment outside the selected groups".into());
    }
    let actions = o.actions();
    let mut used = BTreeSet::new();
    let mut binding: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, robot) in &s.assignments {
        let a = actions[id.as_str()];
        let r = o.robot(robot).ok_or("unknown robot")?;
        if !robot_can_do(o, a, r) {
            return Err(format!("{robot} cannot do {id}"));
        }
        if pair_cost(a, r, geo).is_none() {
            return Err(format!("{robot} cannot reach the target of {id}"));
        }
        if !used.insert(robot.as_str()) {
            return Err(format!("{robot} given two actions"));
        }
        if let RobotChoice::Var(v) = &a.robot {
            if *binding.entry(v.as_str()).or_insert(robot.as_str()) != robot.as_str() {
                return Err(format!("{v} bound to two robots"));
            }
            let already = o.vars.get(v).and_then(|slot| slot.bound.as_deref());
            if already.is_none() && s.new_bindings.get(v) != Some(robot) {
                return Err(format!("{v} binding not reported"));
            }
        }
    }
    if objective(o, &s.selected_groups, &s.assignments, geo) != Some(s.objective) {
        return Err("objective mismatch".into());
    }
    Ok(())
}
