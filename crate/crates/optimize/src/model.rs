//! The 0/1 program behind an assignment instance.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::problem::{
    pair_cost, robot_can_do, OptimizationProblem, RobotChoice, TravelEstimator, GROUP_REWARD,
};
use crate::simplex::Sense;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    /// `x[a,r]`: action `a` runs on robot `r`.
    Assign { action: String, robot: String },
    /// `y[g]`: group `g` starts now.
    Launch { group: usize },
    /// `b[v,r]`: variable `v` binds to robot `r`.
    Bind { var: String, robot: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelVar {
    pub kind: VarKind,
    /// Objective coefficient; the model is maximized.
    pub gain: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

impl Constraint {
    pub fn holds(&self, z: &[bool]) -> bool {
        let lhs: i64 = self
            .coeffs
            .iter()
            .map(|&(j, a)| if z[j] { a } else { 0 })
            .sum();
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Ge => lhs >= self.rhs,
            Sense::Eq => lhs == self.rhs,
        }
    }
}

/// Variables come in tie-break order: every `x` sorted by robot name
/// then action instance, then every `y`, then every `b`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MixedIntegerModel {
    pub vars: Vec<ModelVar>,
    pub constraints: Vec<Constraint>,
}

impl MixedIntegerModel {
    pub fn build(o: &OptimizationProblem, geo: &dyn TravelEstimator) -> Self {
        let actions = o.actions();
        let mut pairs = Vec::new();
        for r in &o.pool {
            for (id, a) in &actions {
                if robot_can_do(o, a, r) {
                    if let Some(cost) = pair_cost(a, r, geo) {
                        pairs.push((r.name.clone(), id.to_string(), cost));
                    }
                }
            }
        }
        pairs.sort();
        let mut m = MixedIntegerModel::default();
        let mut x_of_action: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        let mut x_of_robot: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (robot, action, cost) in &pairs {
            let j = m.vars.len();
            m.vars.push(ModelVar {
                kind: VarKind::Assign {
                    action: action.clone(),
                    robot: robot.clone(),
                },
                gain: -cost,
            });
            x_of_action.entry(action.as_str()).or_default().push(j);
            x_of_robot.entry(robot.as_str()).or_default().push(j);
        }
        let y0 = m.vars.len();
        for g in 0..o.groups.len() {
            m.vars.push(ModelVar {
                kind: VarKind::Launch { group: g },
                gain: GROUP_REWARD,
            });
        }
        for id in actions.keys() {
            let mut coeffs: Vec<(usize, i64)> = x_of_action
                .get(id)
                .map_or(Vec::new(), |xs| xs.iter().map(|&j| (j, 1)).collect());
            let launches: Vec<usize> = o
                .groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.actions.iter().any(|a| a.instance == *id))
                .map(|(g, _)| y0 + g)
                .collect();
            coeffs.extend(launches.iter().map(|&j| (j, -1)));
            m.push(format!("cover[{id}]"), coeffs, Sense::Eq, 0);
            if launches.len() > 1 {
                let once = launches.iter().map(|&j| (j, 1)).collect();
                m.push(format!("once[{id}]"), once, Sense::Le, 1);
            }
        }
        for (robot, xs) in &x_of_robot {
            let coeffs = xs.iter().map(|&j| (j, 1)).collect();
            m.push(format!("busy[{robot}]"), coeffs, Sense::Le, 1);
        }
        for g in 0..o.groups.len() {
            m.push(format!("launch[{g}]"), vec![(y0 + g, 1)], Sense::Le, 1);
        }
        for &(g, h) in &o.conflicts {
            m.push(
                format!("choice[{g},{h}]"),
                vec![(y0 + g, 1), (y0 + h, 1)],
                Sense::Le,
                1,
            );
        }
        let mut per_var: BTreeMap<String, BTreeMap<String, Vec<usize>>> = BTreeMap::new();
        for (j, v) in m.vars.iter().enumerate() {
            if let VarKind::Assign { action, robot } = &v.kind {
                if let RobotChoice::Var(var) = &actions[action.as_str()].robot {
                    let unbound = o.vars.get(var).is_some_and(|s| s.bound.is_none());
                    if unbound {
                        per_var
                            .entry(var.clone())
                            .or_default()
                            .entry(robot.clone())
                            .or_default()
                            .push(j);
                    }
                }
            }
        }
        for (var, robots) in per_var {
            let mut bind_all = Vec::new();
            for (robot, xs) in robots {
                let b = m.vars.len();
                m.vars.push(ModelVar {
                    kind: VarKind::Bind {
                        var: var.clone(),
                        robot: robot.clone(),
                    },
                    gain: 0,
                });
                bind_all.push((b, 1));
                let mut coeffs: Vec<(usize, i64)> = xs.iter().map(|&j| (j, 1)).collect();
                coeffs.push((b, -1));
                m.push(format!("bind[{var},{robot}]"), coeffs, Sense::Le, 0);
            }
            m.push(format!("one[{var}]"), bind_all, Sense::Le, 1);
        }
        m
    }

    fn push(&mut self, name: String, coeffs: Vec<(usize, i64)>, sense: Sense, rhs: i64) {
        self.constraints.push(Constraint {
            name,
            coeffs,
            sense,
            rhs,
        });
    }

    pub fn feasible(&self, z: &[bool]) -> bool {
        self.constraints.iter().all(|c| c.holds(z))
    }

    pub fn value(&self, z: &[bool]) -> i64 {
        self.vars
            .iter()
            .zip(z)
            .filter(|(_, on)| **on)
            .map(|(v, _)| v.gain)
            .sum()
    }

    pub fn var_name(&self, j: usize) -> String {
        match &self.vars[j].kind {
            VarKind::Assign { action, robot } => format!("x[{action},{robot}]"),
            VarKind::Launch { group } => format!("y[{group}]"),
            VarKind::Bind { var, robot } => format!("b[{var},{robot}]"),
        }
    }

    /// Plain-text listing: the objective, then one constraint per line.
    pub fn dump(&self) -> String {
        let term = |a: i64, j: usize| format!("{a:+} {}", self.var_name(j));
        let mut out = String::from("maximize");
        for (j, v) in self.vars.iter().enumerate() {
            if v.gain != 0 {
                let _ = write!(out, " {}", term(v.gain, j));
            }
        }
        out.push('\n');
        for c in &self.constraints {
            let lhs: Vec<String> = c.coeffs.iter().map(|&(j, a)| term(a, j)).collect();
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, "{}: {} {op} {}", c.name, lhs.join(" "), c.rhs);
        }
        out
    }
}
