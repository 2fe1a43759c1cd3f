//! Flattened, id-annotated form of an expanded term.
//!
//! Leaves get instance ids in depth-first order, so every subtree covers a
//! contiguous id range. Nodes are stored in preorder, so every subtree also
//! covers a contiguous node range.

use resh_lang::{AssignMode, Expr, Param, PropSpec, Target, TemporalOp, Term};

pub type InstanceId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeafKind {
    Action { name: String, args: Vec<Expr> },
    WaitEvent { name: String, params: Vec<Param> },
    WaitProp(PropSpec),
    Pause(u64),
    /// Executes `body` in fresh frames until `until` holds. Occupies one
    /// slot in the enclosing word.
    Repeat { body: Box<Plan>, until: PropSpec },
}

/// The innermost `->` / `<->` applying to a leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotBinding {
    pub target: Target,
    pub mode: AssignMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafInfo {
    pub id: InstanceId,
    pub kind: LeafKind,
    pub robot: Option<RobotBinding>,
    pub loc: Option<Target>,
    /// Indices into [`Plan::scopes`] of every `<->` scope containing this
    /// leaf, outermost first.
    pub scopes: Vec<usize>,
}

impl LeafInfo {
    pub fn is_robot_action(&self) -> bool {
        matches!(self.kind, LeafKind::Action { .. })
    }

    /// Short human label: the action or pseudo-action name.
    pub fn label(&self) -> String {
        match &self.kind {
            LeafKind::Action { name, .. } => name.clone(),
            LeafKind::WaitEvent { name, .. } => format!("waitevent {name}"),
            LeafKind::WaitProp(p) => format!("waitprop {}", p.prop),
            LeafKind::Pause(ms) => format!("pause {ms}ms"),
            LeafKind::Repeat { until, .. } => format!("repeat until {}", until.prop),
        }
    }
}

/// A `<->` sub-expression: the robot it reserves and the leaves it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusiveScope {
    pub target: Target,
    pub first: InstanceId,
    pub end: InstanceId,
}

impl ExclusiveScope {
    pub fn contains(&self, id: InstanceId) -> bool {
        (self.first..self.end).contains(&id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Leaf(InstanceId),
    Bin {
        op: TemporalOp,
        lhs: usize,
        rhs: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PlanNode {
    pub shape: Shape,
    /// Leaf ids `first..end` below this node.
    pub first: InstanceId,
    pub end: InstanceId,
    /// One past the last node index of this subtree.
    pub node_end: usize,
}

impl PlanNode {
    pub fn covers(&self, id: InstanceId) -> bool {
        (self.first..self.end).contains(&id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    /// Preorder; the root is node 0.
    pub nodes: Vec<PlanNode>,
    /// Indexed by instance id.
    pub leaves: Vec<LeafInfo>,
    /// Node index of each leaf, indexed by instance id.
    pub leaf_node: Vec<usize>,
    pub scopes: Vec<ExclusiveScope>,
}

impl Plan {
    /// Compiles an expanded term. `Call` nodes must already be inlined.
    pub fn compile(term: &Term) -> Plan {
        Plan::compile_in(term, None, None)
    }

    /// Compiles `term` as if nested under the given robot and location
    /// annotations (used for `repeat` bodies).
    pub fn compile_in(term: &Term, robot: Option<RobotBinding>, loc: Option<Target>) -> Plan {
        let mut plan = Plan {
            nodes: Vec::new(),
            leaves: Vec::new(),
            leaf_node: Vec::new(),
            scopes: Vec::new(),
        };
        let cx = Context {
            robot,
            loc,
            scopes: Vec::new(),
        };
        plan.build(term, &cx);
        plan
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn root(&self) -> &PlanNode {
        &self.nodes[0]
    }

    pub fn leaf(&self, id: InstanceId) -> &LeafInfo {
        &self.leaves[id as usize]
    }

    fn build(&mut self, term: &Term, cx: &Context) {
        match term {
            Term::Group(inner) => self.build(inner, cx),
            Term::Assigned {
                inner,
                mode,
                target,
            } => {
                let mut cx = cx.clone();
                cx.robot = Some(RobotBinding {
                    target: target.clone(),
                    mode: *mode,
                });
                let scope = (*mode == AssignMode::Exclusive).then(|| {
                    self.scopes.push(ExclusiveScope {
                        target: target.clone(),
                        first: self.leaves.len() as InstanceId,
                        end: 0,
                    });
                    self.scopes.len() - 1
                });
                cx.scopes.extend(scope);
                self.build(inner, &cx);
                if let Some(s) = scope {
                    self.scopes[s].end = self.leaves.len() as InstanceId;
                }
            }
            Term::Located { inner, loc } => {
                let mut cx = cx.clone();
                cx.loc = Some(loc.clone());
                self.build(inner, &cx);
            }
            Term::Binary { op, lhs, rhs } => {
                let idx = self.nodes.len();
                let first = self.leaves.len() as InstanceId;
                self.nodes.push(PlanNode {
                    shape: Shape::Leaf(0),
                    first,
                    end: first,
                    node_end: idx,
                });
                let l = self.nodes.len();
                self.build(lhs, cx);
                let r = self.nodes.len();
                self.build(rhs, cx);
                self.nodes[idx] = PlanNode {
                    shape: Shape::Bin {
                        op: *op,
                        lhs: l,
                        rhs: r,
                    },
                    first,
                    end: self.leaves.len() as InstanceId,
                    node_end: self.nodes.len(),
                };
            }
            leaf => {
                let kind = match leaf {
                    Term::Action { name, args } => LeafKind::Action {
                        name: name.clone(),
                        args: args.clone(),
                    },
                    Term::Call { task, args } => LeafKind::Action {
                        name: task.clone(),
                        args: args.clone(),
                    },
                    Term::WaitEvent { name, params } => LeafKind::WaitEvent {
                        name: name.clone(),
                        params: params.clone(),
                    },
                    Term::WaitProp(p) => LeafKind::WaitProp(p.clone()),
                    Term::Pause(ms) => LeafKind::Pause(*ms),
                    Term::Repeat { body, until } => LeafKind::Repeat {
                        body: Box::new(Plan::compile_in(body, cx.robot.clone(), cx.loc.clone())),
                        until: until.clone(),
                    },
                    _ => unreachable!("structural terms handled above"),
                };
                let id = self.leaves.len() as InstanceId;
                let idx = self.nodes.len();
                self.nodes.push(PlanNode {
                    shape: Shape::Leaf(id),
                    first: id,
                    end: id + 1,
                    node_end: idx + 1,
                });
                self.leaf_node.push(idx);
                let is_action = matches!(kind, LeafKind::Action { .. });
                self.leaves.push(LeafInfo {
                    id,
                    kind,
                    robot: if is_action { cx.robot.clone() } else { None },
                    loc: if is_action { cx.loc.clone() } else { None },
                    scopes: cx.scopes.clone(),
                });
            }
        }
    }
}

#[derive(Clone)]
struct Context {
    robot: Option<RobotBinding>,
    loc: Option<Target>,
    scopes: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use resh_lang::parse_term;

    #[test]
    fn ids_are_depth_first_and_ranges_contiguous() {
        let plan = Plan::compile(&parse_term("a => (b + c) & d").unwrap());
        let names: Vec<String> = plan.leaves.iter().map(|l| l.label()).collect();
        assert_eq!(names, ["a", "b", "c", "d"]);
        for (i, n) in plan.nodes.iter().enumerate() {
            if let Shape::Bin { lhs, rhs, .. } = n.shape {
                assert_eq!(lhs, i + 1);
                assert_eq!(plan.nodes[lhs].node_end, rhs);
                assert_eq!(plan.nodes[rhs].node_end, n.node_end);
                assert_eq!(plan.nodes[lhs].first, n.first);
                assert_eq!(plan.nodes[lhs].end, plan.nodes[rhs].first);
                assert_eq!(plan.nodes[rhs].end, n.end);
            }
        }
    }

    #[test]
    fn innermost_annotations_win() {
        let plan = Plan::compile(&parse_term("(a -> s & b) @ L -> r").unwrap());
        assert_eq!(
            plan.leaf(0).robot.as_ref().unwrap().target,
            Target::Var("s".into())
        );
        assert_eq!(
            plan.leaf(1).robot.as_ref().unwrap().target,
            Target::Var("r".into())
        );
        assert_eq!(plan.leaf(0).loc, Some(Target::Var("L".into())));
    }

    #[test]
    fn exclusive_scope_covers_its_leaves() {
        let plan = Plan::compile(&parse_term("x => (a => b) <-> r => c").unwrap());
        assert_eq!(plan.scopes.len(), 1);
        assert_eq!((plan.scopes[0].first, plan.scopes[0].end), (1, 3));
        assert_eq!(plan.leaf(2).scopes, vec![0]);
        assert!(plan.leaf(3).scopes.is_empty());
    }

    #[test]
    fn pseudo_actions_carry_no_robot() {
        let plan = Plan::compile(&parse_term("(waitprop r.ok & a) -> r").unwrap());
        assert!(plan.leaf(0).robot.is_none());
        assert!(!plan.leaf(0).is_robot_action());
        assert!(plan.leaf(1).robot.is_some());
    }
}
