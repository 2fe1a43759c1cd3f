//! Exact and greedy solvers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use log::warn;

use crate::model::{MixedIntegerModel, VarKind};
use crate::problem::{
    objective, pair_cost, robot_can_do, OptimizationProblem, RobotChoice, Solution, SolverKind,
    TravelEstimator,
};
use crate::simplex::{solve_lp, Lp, LpResult, LpRow};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Branch-and-bound nodes before falling back to the greedy answer.
    pub node_limit: usize,
    /// Writes each model to `<dir>/epoch-<n>.txt` when set.
    pub dump_dir: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            node_limit: 20_000,
            dump_dir: None,
        }
    }
}

struct NodeLimit;

struct Bnb<'a> {
    model: &'a MixedIntegerModel,
    nodes: usize,
    limit: usize,
}

enum Goal {
    /// Find the best value strictly above the incumbent.
    Improve,
    /// Stop at the first solution reaching this value.
    Reach(i64),
}

impl Bnb<'_> {
    /// LP bound over the free variables, or `None` when infeasible.
    fn relax(&self, fixed: &[Option<bool>]) -> Option<(f64, Vec<f64>)> {
        let free: Vec<usize> = (0..fixed.len()).filter(|&j| fixed[j].is_none()).collect();
        let mut col = vec![usize::MAX; fixed.len()];
        for (k, &j) in free.iter().enumerate() {
            col[j] = k;
        }
        let mut rows = Vec::new();
        for c in &self.model.constraints {
            let mut rhs = c.rhs as f64;
            let mut coeffs = Vec::new();
            for &(j, a) in &c.coeffs {
                match fixed[j] {
                    Some(true) => rhs -= a as f64,
                    Some(false) => {}
                    None => coeffs.push((col[j], a as f64)),
                }
            }
            if coeffs.is_empty() {
                let ok = match c.sense {
                    crate::simplex::Sense::Le => 0.0 <= rhs,
                    crate::simplex::Sense::Ge => 0.0 >= rhs,
                    crate::simplex::Sense::Eq => rhs == 0.0,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            rows.push(LpRow {
                coeffs,
                sense: c.sense,
                rhs,
            });
        }
        for (k, _) in free.iter().enumerate() {
            rows.push(LpRow {
                coeffs: vec![(k, 1.0)],
                sense: crate::simplex::Sense::Le,
                rhs: 1.0,
            });
        }
        let lp = Lp {
            num_vars: free.len(),
            objective: free.iter().map(|&j| self.model.vars[j].gain as f64).collect(),
            rows,
        };
        let fixed_gain: i64 = fixed
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == Some(true))
            .map(|(j, _)| self.model.vars[j].gain)
            .sum();
        match solve_lp(&lp) {
            LpResult::Optimal { value, x } => {
                let mut full = vec![0.0; fixed.len()];
                for (j, f) in fixed.iter().enumerate() {
                    full[j] = match f {
                        Some(true) => 1.0,
                        Some(false) => 0.0,
                        None => x[col[j]],
                    };
                }
                Some((value + fixed_gain as f64, full))
            }
            _ => None,
        }
    }

    fn search(
        &mut self,
        fixed: &mut Vec<Option<bool>>,
        best: &mut Option<(i64, Vec<bool>)>,
        goal: &Goal,
    ) -> Result<bool, NodeLimit> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(NodeLimit);
        }
        let Some((bound, x)) = self.relax(fixed) else {
            return Ok(false);
        };
        let bound = (bound + 1e-6).floor() as i64;
        let need = match goal {
            Goal::Improve => best.as_ref().map_or(i64::MIN, |b| b.0 + 1),
            Goal::Reach(v) => *v,
        };
        if bound < need {
            return Ok(false);
        }
        let frac = x.iter().position(|v| (v - v.round()).abs() > 1e-6);
        if frac.is_none() {
            let z: Vec<bool> = x.iter().map(|v| *v > 0.5).collect();
            if self.model.feasible(&z) {
                let value = self.model.value(&z);
                if value >= need {
                    *best = Some((value, z));
                    return Ok(matches!(goal, Goal::Reach(_)));
                }
                return Ok(false);
            }
        }
        let j = frac.unwrap_or_else(|| fixed.iter().position(Option::is_none).unwrap_or(0));
        if fixed[j].is_some() {
            return Ok(false);
        }
        for v in [true, false] {
            fixed[j] = Some(v);
            let done = self.search(fixed, best, goal);
            fixed[j] = None;
            if done? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn to_vector(model: &MixedIntegerModel, s: &Solution) -> Vec<bool> {
    model
        .vars
        .iter()
        .map(|v| match &v.kind {
            VarKind::Assign { action, robot } => s.assignments.get(action) == Some(robot),
            VarKind::Launch { group } => s.selected_groups.contains(group),
            VarKind::Bind { var, robot } => s.new_bindings.get(var) == Some(robot),
        })
        .collect()
}

fn from_vector(
    o: &OptimizationProblem,
    model: &MixedIntegerModel,
    z: &[bool],
    solver: SolverKind,
    geo: &dyn TravelEstimator,
) -> Solution {
    let actions = o.actions();
    let mut s = Solution::empty(o.epoch, solver);
    for (v, _) in model.vars.iter().zip(z).filter(|(_, on)| **on) {
        match &v.kind {
            VarKind::Assign { action, robot } => {
                s.assignments.insert(action.clone(), robot.clone());
                if let RobotChoice::Var(var) = &actions[action.as_str()].robot {
                    if o.vars.get(var).is_some_and(|slot| slot.bound.is_none()) {
                        s.new_bindings.insert(var.clone(), robot.clone());
                    }
                }
            }
            VarKind::Launch { group } => s.selected_groups.push(*group),
            VarKind::Bind { .. } => {}
        }
    }
    s.objective = objective(o, &s.selected_groups, &s.assignments, geo)
        .expect("model only holds feasible pairs");
    s
}

pub fn solve(o: &OptimizationProblem, geo: &dyn TravelEstimator) -> Solution {
    solve_with(o, geo, &SolverConfig::default())
}

/// Exact solution by branch and bound. Among optimal solutions the one
/// using the earliest `(robot, action)` pairs wins. Falls back to the
/// greedy solution when the node limit is hit.
pub fn solve_with(
    o: &OptimizationProblem,
    geo: &dyn TravelEstimator,
    cfg: &SolverConfig,
) -> Solution {
    let greedy = greedy_solve(o, geo);
    if o.groups.is_empty() {
        return Solution::empty(o.epoch, SolverKind::Exact);
    }
    let model = MixedIntegerModel::build(o, geo);
    if let Some(dir) = &cfg.dump_dir {
        let path = dir.join(format!("epoch-{}.txt", o.epoch));
        if let Err(e) = std::fs::write(&path, model.dump()) {
            warn!("cannot write {}: {e}", path.display());
        }
    }
    let n = model.vars.len();
    let mut bnb = Bnb {
        model: &model,
        nodes: 0,
        limit: cfg.node_limit,
    };
    let start = to_vector(&model, &greedy);
    debug_assert!(model.feasible(&start));
    let mut best = Some((model.value(&start), start));
    let mut fixed = vec![None; n];
    if bnb.search(&mut fixed, &mut best, &Goal::Improve).is_err() {
        warn!(
            "epoch {}: exact solver hit its node limit, using greedy",
            o.epoch
        );
        return greedy;
    }
    let (value, mut z) = best.expect("greedy seeds the incumbent");
    let assign_vars = model
        .vars
        .iter()
        .take_while(|v| matches!(v.kind, VarKind::Assign { .. }))
        .count();
    for j in 0..assign_vars {
        if !z[j] {
            fixed[j] = Some(true);
            let mut found = None;
            match bnb.search(&mut fixed, &mut found, &Goal::Reach(value)) {
                Ok(true) => z = found.expect("reached").1,
                Ok(false) => {}
                Err(NodeLimit) => break,
            }
        }
        fixed[j] = Some(z[j]);
    }
    from_vector(o, &model, &z, SolverKind::Exact, geo)
}

/// Groups in submission order; each action takes its nearest feasible
/// idle robot, ties broken by robot name.
pub fn greedy_solve(o: &OptimizationProblem, geo: &dyn TravelEstimator) -> Solution {
    let mut s = Solution::empty(o.epoch, SolverKind::Greedy);
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut launched: BTreeSet<&str> = BTreeSet::new();
    for (gi, g) in o.groups.iter().enumerate() {
        if s.selected_groups.iter().any(|&h| o.in_conflict(gi, h))
            || g.actions.iter().any(|a| launched.contains(a.instance.as_str()))
        {
            continue;
        }
        let mut taken: BTreeMap<String, String> = BTreeMap::new();
        let mut binds: BTreeMap<String, String> = BTreeMap::new();
        let mut ok = true;
        for a in &g.actions {
            let pinned = match &a.robot {
                RobotChoice::Var(v) => s.new_bindings.get(v).or(binds.get(v)).cloned(),
                _ => None,
            };
            let pick = o
                .pool
                .iter()
                .filter(|r| pinned.as_ref().is_none_or(|p| *p == r.name))
                .filter(|r| !used.contains(&r.name) && !taken.values().any(|t| *t == r.name))
                .filter(|r| robot_can_do(o, a, r))
                .filter_map(|r| pair_cost(a, r, geo).map(|c| (c, &r.name)))
                .min();
            match pick {
                Some((_, robot)) => {
                    if let RobotChoice::Var(v) = &a.robot {
                        if o.vars.get(v).is_some_and(|slot| slot.bound.is_none()) {
                            binds.insert(v.clone(), robot.clone());
                        }
                    }
                    taken.insert(a.instance.clone(), robot.clone());
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        s.selected_groups.push(gi);
        for a in &g.actions {
            launched.insert(a.instance.as_str());
        }
        used.extend(taken.values().cloned());
        s.assignments.extend(taken);
        s.new_bindings.extend(binds);
    }
    s.objective = objective(o, &s.selected_groups, &s.assignments, geo)
        .expect("greedy only uses feasible pairs");
    s
}
